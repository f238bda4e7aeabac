// Page wiring: RO and OSO tabs against the server that hosts these assets.

import { Api, OperatorState, Poi } from "./api.js";
import { OsoController, OsoPanel } from "./oso.js";
import { CanvasRenderer } from "./render.js";
import { RoController } from "./ro.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setupTabs(): void {
  const tabs = document.querySelectorAll<HTMLButtonElement>("[data-tab]");
  tabs.forEach((btn) =>
    btn.addEventListener("click", () => {
      tabs.forEach((b) => b.classList.toggle("active", b === btn));
      document.querySelectorAll<HTMLElement>(".view").forEach((v) => {
        v.hidden = v.id !== btn.dataset.tab;
      });
    }),
  );
}

class DomOsoPanel implements OsoPanel {
  constructor(
    private readonly list: HTMLElement,
    private readonly operators: HTMLElement,
    private readonly errors: HTMLElement,
    private readonly onSelect: (poiId: string) => void,
  ) {}

  renderPois(pois: Poi[], nextTarget: string | null): void {
    this.list.replaceChildren(
      ...pois.map((p) => {
        const li = document.createElement("li");
        const dist = p.dist_m === undefined ? "" : ` at ${p.dist_m.toFixed(1)} m`;
        const glyph = p.marker_height_m === undefined ? "" :
          ` (cylinder ${p.marker_height_m.toFixed(2)} m)`;
        li.textContent = `${p.id} ${p.kind}${dist}${glyph}`;
        if (p.id === nextTarget) li.classList.add("next-target");
        const btn = document.createElement("button");
        btn.textContent = "next target";
        btn.addEventListener("click", () => this.onSelect(p.id));
        li.appendChild(btn);
        return li;
      }),
    );
    if (!pois.length) {
      const li = document.createElement("li");
      li.textContent = "no POIs yet";
      this.list.replaceChildren(li);
    }
  }

  renderOperators(operators: OperatorState[]): void {
    this.operators.replaceChildren(
      ...operators.map((o) => {
        const li = document.createElement("li");
        const where = o.location
          ? `${o.location.lat_deg.toFixed(6)}, ${o.location.lon_deg.toFixed(6)}`
          : "location unknown";
        li.textContent = `${o.id} [${o.role}] ${where}` +
          (o.next_target ? ` -> ${o.next_target}` : "");
        return li;
      }),
    );
  }

  showError(message: string): void {
    this.errors.textContent = message;
  }
}

async function start(): Promise<void> {
  const api = new Api("");
  setupTabs();

  // RO view
  const canvas = el<HTMLCanvasElement>("video-canvas");
  const renderer = new CanvasRenderer(canvas, el("ro-error"), el("ro-status"));
  const ro = new RoController(api, renderer);
  await ro.init();
  el<HTMLSelectElement>("poi-kind").addEventListener("change", (ev) => {
    ro.poiKind = (ev.target as HTMLSelectElement).value;
  });
  canvas.addEventListener("click", (ev) => {
    const rect = canvas.getBoundingClientRect();
    const px = renderer.toFramePixel(ev.clientX - rect.left, ev.clientY - rect.top);
    void ro.onClick(px.u, px.v);
  });
  setInterval(() => void ro.pollPois(), 5000);

  let streamAbort: AbortController | null = null;
  el<HTMLButtonElement>("subscribe").addEventListener("click", () => {
    streamAbort?.abort();
    streamAbort = new AbortController();
    const uav = el<HTMLInputElement>("uav-id").value || "sim-000";
    api.streamTelemetry(uav, (rec) => ro.onFrame(rec), streamAbort.signal)
      .catch((err) => renderer.showError(`stream: ${err.message}`));
  });

  // OSO view
  const panel = new DomOsoPanel(
    el("poi-list"), el("operator-list"), el("oso-error"),
    (poiId) => void oso.selectNextTarget(poiId),
  );
  const oso = new OsoController(api, panel);
  el<HTMLButtonElement>("report-location").addEventListener("click", () => {
    void oso.reportLocation({
      lat_deg: parseFloat(el<HTMLInputElement>("oso-lat").value),
      lon_deg: parseFloat(el<HTMLInputElement>("oso-lon").value),
      alt_m: 0,
    });
  });
  oso.start();
}

void start();
