// Remote-operator view: renders each telemetry frame as a vector scene and
// turns pixel clicks into POIs through the server's geolocate endpoint.
// Every pixel drawn comes from a /v1/project response.

import { Api, ApiError, Coord, Poi, Scene, TelemetryRecord } from "./api.js";

export interface Pixel {
  u: number;
  v: number;
}

export interface SceneRenderer {
  begin(widthPx: number, heightPx: number, frame: TelemetryRecord): void;
  drawGridSegment(a: Pixel, b: Pixel): void;
  drawWhiteboard(cornersPx: Pixel[]): void;
  drawMarker(at: Pixel, poi: Poi): void;
  showError(message: string): void;
  end(): void;
}

export class RoController {
  private latest: TelemetryRecord | null = null;
  private pending: TelemetryRecord | null = null;
  private rendering = false;
  private pois = new Map<string, Poi>();
  private cursor = 0;
  scene: Scene | null = null;
  poiKind = "victim";

  constructor(
    private readonly api: Api,
    private readonly renderer: SceneRenderer,
    readonly operatorId: string = "ro1",
  ) {}

  async init(): Promise<void> {
    this.scene = await this.api.scene();
  }

  get currentFrame(): TelemetryRecord | null {
    return this.latest;
  }

  get knownPois(): Poi[] {
    return [...this.pois.values()].filter((p) => !p.deleted);
  }

  private origin(): Coord {
    if (this.scene) return this.scene.mission_origin;
    const f = this.latest;
    // No scene: anchor at the first frame's ground track.
    return { lat_deg: f?.lat_deg ?? 0, lon_deg: f?.lon_deg ?? 0, alt_m: 0 };
  }

  private groundAlt(): number {
    return this.scene?.ground_alt_m ?? 0;
  }

  // Feed one telemetry record; frames arriving while a render is in
  // flight coalesce so the view always shows the newest pose.
  async onFrame(rec: TelemetryRecord): Promise<void> {
    this.latest = rec;
    if (this.rendering) {
      this.pending = rec;
      return;
    }
    this.rendering = true;
    try {
      let frame: TelemetryRecord | null = rec;
      while (frame) {
        await this.renderFrame(frame);
        frame = this.pending;
        this.pending = null;
      }
    } finally {
      this.rendering = false;
    }
  }

  private async projectPoint(frame: TelemetryRecord, p: Coord): Promise<Pixel | null> {
    try {
      const r = await this.api.project(frame, p, this.origin());
      return { u: r.u_px, v: r.v_px };
    } catch (err) {
      if (err instanceof ApiError && err.code === "behind_camera") return null;
      throw err;
    }
  }

  private async renderFrame(frame: TelemetryRecord): Promise<void> {
    this.renderer.begin(frame.width_px, frame.height_px, frame);
    const jobs: Promise<void>[] = [];
    for (const line of this.scene?.grid_lines ?? []) {
      jobs.push(
        Promise.all(line.map((p) => this.projectPoint(frame, p))).then((pts) => {
          for (let i = 1; i < pts.length; i++) {
            const a = pts[i - 1];
            const b = pts[i];
            if (a && b) this.renderer.drawGridSegment(a, b);
          }
        }),
      );
    }
    const corners = this.scene?.whiteboard_corners;
    if (corners && corners.length === 4) {
      jobs.push(
        Promise.all(corners.map((p) => this.projectPoint(frame, p))).then((pts) => {
          if (pts.every((p) => p !== null)) {
            this.renderer.drawWhiteboard(pts as Pixel[]);
          }
        }),
      );
    }
    for (const poi of this.knownPois) {
      jobs.push(
        this.projectPoint(frame, {
          lat_deg: poi.lat_deg,
          lon_deg: poi.lon_deg,
          alt_m: poi.alt_m,
        }).then((px) => {
          if (px) this.renderer.drawMarker(px, poi);
        }),
      );
    }
    await Promise.all(jobs);
    this.renderer.end();
  }

  // A click on the video canvas, in frame pixel coordinates. Creates a POI
  // at the ray/ground intersection, or surfaces the sky-click error inline.
  async onClick(u: number, v: number): Promise<Poi | null> {
    const frame = this.latest;
    if (!frame) {
      this.renderer.showError("no frame yet");
      return null;
    }
    let location: Coord;
    try {
      location = await this.api.geolocate(frame, u, v, this.groundAlt(), this.origin());
    } catch (err) {
      if (err instanceof ApiError && err.code === "ray_misses_ground") {
        this.renderer.showError("that pixel views the sky - no ground intersection");
        return null;
      }
      throw err;
    }
    const poi = await this.api.addPoi(this.poiKind, location, this.operatorId);
    this.pois.set(poi.id, poi);
    if (this.latest) await this.onFrame(this.latest); // marker appears immediately
    return poi;
  }

  // Pull POI changes (other operators' annotations included).
  async pollPois(): Promise<void> {
    const { pois, cursor } = await this.api.listPois(this.cursor);
    for (const p of pois) this.pois.set(p.id, p);
    this.cursor = cursor;
  }
}
