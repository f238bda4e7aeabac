// On-site-operator view: polls the POI database on the fixed 5-second
// mission cadence, shows each POI with its server-computed distance and
// marker height, and reports the operator's own position and next target.

import { Api, Coord, OperatorState, Poi } from "./api.js";

export const POLL_INTERVAL_MS = 5000;

export interface OsoPanel {
  renderPois(pois: Poi[], nextTarget: string | null): void;
  renderOperators(operators: OperatorState[]): void;
  showError(message: string): void;
}

export class OsoController {
  private pois = new Map<string, Poi>();
  private cursor = 0;
  private timer: ReturnType<typeof setInterval> | null = null;
  nextTarget: string | null = null;
  location: Coord | null = null;

  constructor(
    private readonly api: Api,
    private readonly panel: OsoPanel,
    readonly operatorId: string = "oso1",
  ) {}

  get knownPois(): Poi[] {
    return [...this.pois.values()]
      .filter((p) => !p.deleted)
      .sort((a, b) => (a.dist_m ?? Infinity) - (b.dist_m ?? Infinity));
  }

  async poll(): Promise<void> {
    try {
      const { pois, cursor } = await this.api.listPois(this.cursor, this.operatorId);
      // Distance annotations refresh with every poll, so re-fetch from 0
      // would be wasteful; instead merge revisions and keep stale dist
      // until the next location update forces one.
      for (const p of pois) this.pois.set(p.id, p);
      this.cursor = cursor;
      const { operators } = await this.api.listOperators();
      this.panel.renderPois(this.knownPois, this.nextTarget);
      this.panel.renderOperators(operators);
    } catch (err) {
      this.panel.showError(`poll failed: ${(err as Error).message}`);
    }
  }

  start(): void {
    if (this.timer !== null) return;
    void this.poll();
    this.timer = setInterval(() => void this.poll(), POLL_INTERVAL_MS);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  async reportLocation(location: Coord): Promise<void> {
    this.location = location;
    await this.api.updateOperator(this.operatorId, "OSO", location,
      this.nextTarget ?? undefined);
    // Distances are computed against the reported location; refresh them.
    this.cursor = 0;
    this.pois.clear();
    await this.poll();
  }

  async selectNextTarget(poiId: string): Promise<void> {
    await this.api.updateOperator(this.operatorId, "OSO",
      this.location ?? undefined, poiId);
    this.nextTarget = poiId;
    this.panel.renderPois(this.knownPois, this.nextTarget);
  }
}
