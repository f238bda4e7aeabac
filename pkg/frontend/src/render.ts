// Canvas renderer: pure drawing of server-supplied pixels.

import { Poi } from "./api.js";
import { Pixel, SceneRenderer } from "./ro.js";
import { TelemetryRecord } from "./api.js";

const KIND_COLORS: Record<string, string> = {
  victim: "#ff5555",
  evidence: "#f1c40f",
  hazard: "#ff9e3d",
  other: "#7aa2f7",
};

export class CanvasRenderer implements SceneRenderer {
  private scaleX = 1;
  private scaleY = 1;
  private readonly ctx: CanvasRenderingContext2D;

  constructor(
    private readonly canvas: HTMLCanvasElement,
    private readonly errorBox: HTMLElement,
    private readonly statusBox: HTMLElement | null = null,
  ) {
    this.ctx = canvas.getContext("2d")!;
  }

  // Canvas pixels -> frame pixels for click handling.
  toFramePixel(offsetX: number, offsetY: number): Pixel {
    return { u: offsetX / this.scaleX, v: offsetY / this.scaleY };
  }

  begin(widthPx: number, heightPx: number, frame: TelemetryRecord): void {
    this.scaleX = this.canvas.width / widthPx;
    this.scaleY = this.canvas.height / heightPx;
    this.ctx.fillStyle = "#13251a";
    this.ctx.fillRect(0, 0, this.canvas.width, this.canvas.height);
    if (this.statusBox) {
      this.statusBox.textContent =
        `${frame.uav_id}  seq ${frame.seq}  alt ${frame.alt_m.toFixed(1)} m`;
    }
  }

  private px(p: Pixel): [number, number] {
    return [p.u * this.scaleX, p.v * this.scaleY];
  }

  drawGridSegment(a: Pixel, b: Pixel): void {
    const ctx = this.ctx;
    ctx.strokeStyle = "rgba(130, 180, 140, 0.35)";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.moveTo(...this.px(a));
    ctx.lineTo(...this.px(b));
    ctx.stroke();
  }

  drawWhiteboard(cornersPx: Pixel[]): void {
    const ctx = this.ctx;
    ctx.fillStyle = "rgba(240, 240, 240, 0.9)";
    ctx.beginPath();
    ctx.moveTo(...this.px(cornersPx[0]));
    for (const c of cornersPx.slice(1)) ctx.lineTo(...this.px(c));
    ctx.closePath();
    ctx.fill();
  }

  drawMarker(at: Pixel, poi: Poi): void {
    const ctx = this.ctx;
    const [x, y] = this.px(at);
    ctx.strokeStyle = KIND_COLORS[poi.kind] ?? KIND_COLORS.other;
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, 10, 0, Math.PI * 2);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(x - 14, y);
    ctx.lineTo(x + 14, y);
    ctx.moveTo(x, y - 14);
    ctx.lineTo(x, y + 14);
    ctx.stroke();
    ctx.font = "12px ui-monospace, monospace";
    ctx.fillStyle = "#e7e7e7";
    ctx.fillText(`${poi.kind} ${poi.id.slice(-3)}`, x + 14, y - 10);
  }

  showError(message: string): void {
    this.errorBox.textContent = message;
    this.errorBox.classList.add("visible");
    setTimeout(() => this.errorBox.classList.remove("visible"), 4000);
  }

  end(): void {
    // single-buffer canvas; nothing to flip
  }
}
