// Console round trip against a live local server (spawned here).

import { spawn, ChildProcess } from "node:child_process";
import { createServer } from "node:net";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { Api, Poi, TelemetryRecord } from "../src/api.js";
import { OsoController, OsoPanel } from "../src/oso.js";
import { Pixel, RoController, SceneRenderer } from "../src/ro.js";

// Orientation fixtures exported by the engine (`pose_from_gimbal`).
const NADIR_Q = { qw: 3.061616997868383e-17, qx: -1.0, qy: 0.0, qz: 0.0 };
const PITCH20_Q = { qw: 0.5735764363510462, qx: -0.8191520442889917, qy: 0.0, qz: 0.0 };

function makeFrame(seq: number, q: typeof NADIR_Q, uav = "test-uav"): TelemetryRecord {
  return {
    uav_id: uav,
    seq,
    t_ms: 1726000000000 + seq * 200,
    lat_deg: 38.6367,
    lon_deg: -90.2342,
    alt_m: 30.0,
    ...q,
    hfov_deg: 90.0,
    width_px: 1920,
    height_px: 1080,
  };
}

class RecordingRenderer implements SceneRenderer {
  markers: { at: Pixel; poi: Poi }[] = [];
  errors: string[] = [];

  begin(): void {
    this.markers = [];
  }
  drawGridSegment(): void {}
  drawWhiteboard(): void {}
  drawMarker(at: Pixel, poi: Poi): void {
    this.markers.push({ at, poi });
  }
  showError(message: string): void {
    this.errors.push(message);
  }
  end(): void {}
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const port = (srv.address() as { port: number }).port;
      srv.close((err) => (err ? reject(err) : resolve(port)));
    });
  });
}

let proc: ChildProcess;
let base: string;
let api: Api;

beforeAll(async () => {
  const port = await freePort();
  base = `http://127.0.0.1:${port}`;
  proc = spawn("python3", ["-m", "skymark.cli", "serve", "--host", "127.0.0.1",
                           "--port", String(port)], {
    stdio: "ignore",
  });
  const deadline = Date.now() + 20000;
  for (;;) {
    try {
      const resp = await fetch(`${base}/healthz`);
      if (resp.ok) break;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("server never became ready");
    await new Promise((r) => setTimeout(r, 100));
  }
  api = new Api(base);
}, 30000);

afterAll(() => {
  proc?.kill();
});

describe("console against a live server", () => {
  it("scripted click at a known POI's pixel creates it and the marker lands within 1 px", async () => {
    const renderer = new RecordingRenderer();
    const ro = new RoController(api, renderer);
    await ro.init();

    const frame = makeFrame(0, NADIR_Q);
    await ro.onFrame(frame);

    // Define the known POI as the ground point under a chosen pixel, so
    // its projected pixel is that pixel (server math both ways).
    const clickAt = { u: 700.5, v: 410.25 };
    const origin = { lat_deg: frame.lat_deg, lon_deg: frame.lon_deg, alt_m: 0 };
    const known = await api.geolocate(frame, clickAt.u, clickAt.v, 0.0, origin);
    const expected = await api.project(frame, known, origin);

    const poi = await ro.onClick(clickAt.u, clickAt.v);
    expect(poi).not.toBeNull();
    expect(renderer.markers.length).toBeGreaterThan(0);
    const marker = renderer.markers.find((m) => m.poi.id === poi!.id)!;
    expect(Math.hypot(marker.at.u - expected.u_px,
                      marker.at.v - expected.v_px)).toBeLessThan(1.0);
  }, 20000);

  it("sky click produces the inline error and no POI", async () => {
    const renderer = new RecordingRenderer();
    const ro = new RoController(api, renderer);
    await ro.init();
    await ro.onFrame(makeFrame(0, PITCH20_Q, "sky-uav"));

    const before = await api.listPois(0);
    const result = await ro.onClick(960, 50); // above the pitch-20 horizon row
    expect(result).toBeNull();
    expect(renderer.errors).toHaveLength(1);
    const after = await api.listPois(0);
    expect(after.pois.length).toBe(before.pois.length);
  }, 20000);

  it("a second client sees a new POI within one poll period", async () => {
    const seen: { pois: Poi[]; at: number }[] = [];
    const panel: OsoPanel = {
      renderPois(pois) {
        seen.push({ pois: [...pois], at: Date.now() });
      },
      renderOperators() {},
      showError(m) {
        throw new Error(m);
      },
    };
    const oso = new OsoController(api, panel);
    oso.start(); // production 5 s cadence
    await new Promise((r) => setTimeout(r, 300)); // first poll settles

    const t0 = Date.now();
    const poi = await api.addPoi("evidence",
      { lat_deg: 38.6368, lon_deg: -90.2341, alt_m: 0 }, "ro-second-client");

    const deadline = t0 + 6500; // 5 s poll + round trip + scheduling slack
    let observedAt: number | null = null;
    while (Date.now() < deadline) {
      const hit = seen.find((s) => s.pois.some((p) => p.id === poi.id));
      if (hit) {
        observedAt = hit.at;
        break;
      }
      await new Promise((r) => setTimeout(r, 50));
    }
    oso.stop();
    expect(observedAt).not.toBeNull();
    expect(observedAt! - t0).toBeLessThanOrEqual(6500);
  }, 20000);

  it("tails the telemetry stream in publish order", async () => {
    const lines = [0, 1, 2].map((i) => JSON.stringify(makeFrame(i, NADIR_Q, "tail-uav")));
    await api.publishTelemetry("tail-uav", ""); // register the topic
    const received: number[] = [];
    const abort = new AbortController();
    const tail = api.streamTelemetry("tail-uav", (rec) => {
      received.push(rec.seq);
      if (received.length === 3) abort.abort();
    }, abort.signal).catch(() => received.length);
    await new Promise((r) => setTimeout(r, 300));
    await api.publishTelemetry("tail-uav", lines.join("\n") + "\n");
    await tail;
    expect(received).toEqual([0, 1, 2]);
  }, 20000);
});
