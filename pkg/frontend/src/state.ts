/** Session controller: mirrors server state, never invents a question.
 *
 * The adaptive contract is enforced here: at most one unanswered question
 * exists at a time, and nothing is fetched while an answer is in flight.
 */

import { ApiError, SessionApi, TreeView } from "./api.js";

export type Phase = "idle" | "asking" | "submitting" | "done";

export interface ViewState {
  phase: Phase;
  sessionId: string | null;
  triplet: string[] | null;
  tree: TreeView | null;
  error: string | null;
}

export class SessionController {
  private state: ViewState = { phase: "idle", sessionId: null, triplet: null, tree: null, error: null };
  private listeners: Array<(s: ViewState) => void> = [];
  /** how many questions were showing at once; must never exceed 1 */
  maxPendingSeen = 0;
  private pendingCount = 0;

  constructor(private api: SessionApi) {}

  snapshot(): ViewState {
    return { ...this.state, triplet: this.state.triplet ? [...this.state.triplet] : null };
  }

  onChange(fn: (s: ViewState) => void): void {
    this.listeners.push(fn);
  }

  private emit(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    const snap = this.snapshot();
    for (const fn of this.listeners) fn(snap);
  }

  async start(elements: string[], mode: "noiseless" | "noisy", p?: number): Promise<void> {
    const created = await this.api.createSession(elements, mode, p);
    this.emit({ sessionId: created.id, error: null });
    await this.refresh();
  }

  /** Pull the pending question (or done state) and the current tree. */
  async refresh(): Promise<void> {
    if (!this.state.sessionId || this.state.phase === "submitting") return;
    const id = this.state.sessionId;
    const tree = await this.api.tree(id);
    const q = await this.api.nextQuery(id);
    if ("triplet" in q && q.triplet) {
      this.pendingCount = 1;
      this.maxPendingSeen = Math.max(this.maxPendingSeen, this.pendingCount);
      this.emit({ phase: "asking", triplet: [...q.triplet].sort(), tree, error: null });
    } else {
      this.pendingCount = 0;
      this.emit({ phase: "done", triplet: null, tree, error: null });
    }
  }

  /** Submit the chosen pair; on server rejection the question is re-enabled. */
  async answer(pair: [string, string]): Promise<void> {
    if (this.state.phase !== "asking" || !this.state.triplet) {
      throw new Error("no question is awaiting an answer");
    }
    if (!pair.every((x) => this.state.triplet!.includes(x)) || pair[0] === pair[1]) {
      this.emit({ error: "pick two distinct cards of this question" });
      return;
    }
    this.emit({ phase: "submitting", error: null });
    this.pendingCount = 0;
    try {
      await this.api.answer(this.state.sessionId!, pair);
    } catch (err) {
      const msg = err instanceof ApiError ? `server rejected the answer (${err.status}): ${err.message}` : String(err);
      this.emit({ phase: "asking", error: msg });
      this.pendingCount = 1;
      return;
    }
    this.emit({ phase: "idle" });
    await this.refresh();
  }
}
