// Typed client for the skymark v1 HTTP API. Every coordinate the console
// ever touches comes back from these calls; the client does no geodesy.

export interface Coord {
  lat_deg: number;
  lon_deg: number;
  alt_m: number;
}

export interface TelemetryRecord {
  uav_id: string;
  seq: number;
  t_ms: number;
  lat_deg: number;
  lon_deg: number;
  alt_m: number;
  qw: number;
  qx: number;
  qy: number;
  qz: number;
  hfov_deg: number;
  width_px: number;
  height_px: number;
}

export interface ProjectResult {
  u_px: number;
  v_px: number;
  in_frame: boolean;
}

export interface Poi {
  id: string;
  kind: string;
  label: string | null;
  lat_deg: number;
  lon_deg: number;
  alt_m: number;
  created_by: string;
  created_at_ms: number;
  revision: number;
  deleted: boolean;
  dist_m?: number;
  marker_height_m?: number;
}

export interface OperatorState {
  id: string;
  role: string;
  updated_at_ms: number;
  next_target: string | null;
  location: Coord | null;
}

export interface Scene {
  mission_origin: Coord;
  poi_truth?: Coord;
  ground_alt_m: number;
  whiteboard_corners?: Coord[];
  grid_lines?: Coord[][];
  intrinsics?: { width_px: number; height_px: number; hfov_deg: number };
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class Api {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers: body === undefined ? undefined : { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const data = await resp.json();
    if (!resp.ok) {
      const err = (data as { error?: { code?: string; message?: string } }).error ?? {};
      throw new ApiError(err.code ?? "unknown", err.message ?? resp.statusText, resp.status);
    }
    return data as T;
  }

  geolocate(
    frame: TelemetryRecord,
    u_px: number,
    v_px: number,
    groundAlt: number,
    origin: Coord,
  ): Promise<Coord> {
    return this.request<Coord>("POST", "/v1/geolocate", {
      ...frame,
      u_px,
      v_px,
      ground_mode: "plane",
      ground_alt_m: groundAlt,
      origin_lat_deg: origin.lat_deg,
      origin_lon_deg: origin.lon_deg,
      origin_alt_m: origin.alt_m,
    });
  }

  project(frame: TelemetryRecord, poi: Coord, origin: Coord): Promise<ProjectResult> {
    return this.request<ProjectResult>("POST", "/v1/project", {
      ...frame,
      poi_lat_deg: poi.lat_deg,
      poi_lon_deg: poi.lon_deg,
      poi_alt_m: poi.alt_m,
      origin_lat_deg: origin.lat_deg,
      origin_lon_deg: origin.lon_deg,
      origin_alt_m: origin.alt_m,
    });
  }

  addPoi(kind: string, location: Coord, createdBy: string, label?: string): Promise<Poi> {
    return this.request<Poi>("POST", "/v1/pois", {
      kind,
      lat_deg: location.lat_deg,
      lon_deg: location.lon_deg,
      alt_m: location.alt_m,
      created_by: createdBy,
      label,
    });
  }

  listPois(cursor: number, operator?: string): Promise<{ pois: Poi[]; cursor: number }> {
    const params = new URLSearchParams({ cursor: String(cursor) });
    if (operator !== undefined) params.set("operator", operator);
    return this.request("GET", `/v1/pois?${params}`);
  }

  updateOperator(
    id: string,
    role: string,
    location?: Coord,
    nextTarget?: string,
  ): Promise<OperatorState> {
    const body: Record<string, unknown> = { role };
    if (location) {
      body.lat_deg = location.lat_deg;
      body.lon_deg = location.lon_deg;
      body.alt_m = location.alt_m;
    }
    if (nextTarget !== undefined) body.next_target = nextTarget;
    return this.request<OperatorState>("POST", `/v1/operators/${id}`, body);
  }

  listOperators(): Promise<{ operators: OperatorState[] }> {
    return this.request("GET", "/v1/operators");
  }

  async scene(): Promise<Scene | null> {
    try {
      return await this.request<Scene>("GET", "/v1/scene");
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  async publishTelemetry(uavId: string, lines: string): Promise<{ published: number }> {
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/streams/${uavId}`, {
      method: "POST",
      body: lines,
    });
    return (await resp.json()) as { published: number };
  }

  // Tail a UAV stream, invoking onRecord per decoded record until aborted
  // or the stream ends. Resolves with the number of records seen.
  async streamTelemetry(
    uavId: string,
    onRecord: (rec: TelemetryRecord) => void | Promise<void>,
    signal?: AbortSignal,
  ): Promise<number> {
    const resp = await this.fetchImpl(`${this.baseUrl}/v1/streams/${uavId}`, { signal });
    if (!resp.ok || resp.body === null) {
      throw new ApiError("not_found", `stream ${uavId} unavailable`, resp.status);
    }
    const reader = resp.body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    let count = 0;
    for (;;) {
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      for (;;) {
        const nl = buffer.indexOf("\n");
        if (nl < 0) break;
        const line = buffer.slice(0, nl).trim();
        buffer = buffer.slice(nl + 1);
        if (!line) continue;
        const rec = JSON.parse(line) as TelemetryRecord & { error?: unknown };
        if (rec.error !== undefined) return count; // slow-consumer farewell
        await onRecord(rec);
        count += 1;
      }
    }
    return count;
  }
}
