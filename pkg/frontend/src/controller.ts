/**
 * Review session state machine.
 *
 * One card is active at a time and at most one mark request is in flight:
 * submit() is ignored unless a card is showing, and the next card only
 * renders after the service acknowledged the mark. Items are displayed
 * exactly in the order the service hands them out.
 */

import { ReviewApi, ReviewItem, SessionStats, Verdict } from "./api.js";

export interface ReviewCard {
  itemId: string;
  pairId: string;
  candidate: string;
  sourceQuestion: string;
  answer: string;
  position: number;
  total: number;
}

export type ControllerState =
  | { kind: "idle" }
  | { kind: "loading" }
  | { kind: "card"; card: ReviewCard }
  | { kind: "submitting"; card: ReviewCard }
  | { kind: "done"; stats: SessionStats }
  | { kind: "error"; message: string };

function toCard(item: ReviewItem): ReviewCard {
  return {
    itemId: item.item_id,
    pairId: item.pair_id,
    candidate: item.candidate,
    sourceQuestion: item.source_question,
    answer: item.answer,
    position: item.position,
    total: item.total,
  };
}

export class ReviewController {
  state: ControllerState = { kind: "idle" };
  stats: SessionStats | null = null;
  /** Item ids in display order; the service order is never rearranged. */
  readonly seenItemIds: string[] = [];

  private listeners: Array<(state: ControllerState) => void> = [];

  constructor(
    private readonly api: ReviewApi,
    readonly sessionId: string,
  ) {}

  onChange(listener: (state: ControllerState) => void): void {
    this.listeners.push(listener);
  }

  private setState(state: ControllerState): void {
    this.state = state;
    for (const listener of this.listeners) {
      listener(state);
    }
  }

  /** Running acceptance ratio as acknowledged by the service. */
  ratio(): number | null {
    return this.stats ? this.stats.acceptance_ratio : null;
  }

  async loadNext(): Promise<void> {
    if (this.state.kind === "loading" || this.state.kind === "submitting") {
      return;
    }
    this.setState({ kind: "loading" });
    try {
      const next = await this.api.nextItem(this.sessionId);
      if (next.done) {
        this.stats = next.stats;
        this.setState({ kind: "done", stats: next.stats });
        return;
      }
      const card = toCard(next.item);
      if (this.seenItemIds[this.seenItemIds.length - 1] !== card.itemId) {
        this.seenItemIds.push(card.itemId);
      }
      this.setState({ kind: "card", card });
    } catch (err) {
      this.setState({ kind: "error", message: String(err) });
    }
  }

  /**
   * Send a verdict for the current card, then auto-advance.
   * Returns false when ignored: no card showing or a mark already in flight.
   */
  async submit(verdict: Verdict, note?: string): Promise<boolean> {
    if (this.state.kind !== "card") {
      return false;
    }
    const card = this.state.card;
    this.setState({ kind: "submitting", card });
    try {
      this.stats = await this.api.submitMark(this.sessionId, card.itemId, verdict, note);
    } catch (err) {
      this.setState({ kind: "error", message: String(err) });
      return false;
    }
    this.setState({ kind: "idle" });
    await this.loadNext();
    return true;
  }

  /** Error-banner retry: re-fetch the first unmarked item. */
  async retry(): Promise<void> {
    if (this.state.kind === "error") {
      this.setState({ kind: "idle" });
    }
    await this.loadNext();
  }
}
