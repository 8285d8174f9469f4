/** Wizard session state: cursor, recorded choices, fetched results.
 *
 * Choices post to the server one screen at a time, so a recorded choice is
 * immutable; back-navigation reviews earlier screens without editing them.
 * Refreshing mid-flow rebuilds the state from the stored session record.
 */

import type {
  Choice,
  PortfolioPayload,
  Question,
  SessionRecord,
  UtilitiesByEstimator,
} from "./types.js";

export type Stage = "questioning" | "answered" | "elicited" | "recommended";

export class UiSessionState {
  readonly sessionId: string;
  readonly questions: Question[];
  private recorded: (Choice | null)[];
  private viewing = 0;
  utilities: UtilitiesByEstimator | null = null;
  portfolio: PortfolioPayload | null = null;

  constructor(sessionId: string, questions: Question[]) {
    this.sessionId = sessionId;
    this.questions = [...questions].sort((a, b) => a.index - b.index);
    this.recorded = this.questions.map(() => null);
  }

  get k(): number {
    return this.questions.length;
  }

  /** Screens answered so far; also the index of the active screen. */
  get cursor(): number {
    const first = this.recorded.indexOf(null);
    return first === -1 ? this.k : first;
  }

  get viewingIndex(): number {
    return Math.min(this.viewing, Math.max(this.k - 1, 0));
  }

  get complete(): boolean {
    return this.cursor === this.k;
  }

  get stage(): Stage {
    if (this.portfolio) return "recommended";
    if (this.utilities) return "elicited";
    return this.complete ? "answered" : "questioning";
  }

  choiceAt(index: number): Choice | null {
    return this.recorded[index] ?? null;
  }

  /** Record the active screen's choice; earlier screens are immutable. */
  record(index: number, choice: Choice): void {
    if (index !== this.cursor) {
      throw new Error(`screen ${index} is not the active screen (${this.cursor})`);
    }
    if (this.complete) {
      throw new Error("all screens are already answered");
    }
    this.recorded[index] = choice;
    this.viewing = Math.min(index + 1, this.k - 1);
  }

  back(): void {
    this.viewing = Math.max(0, this.viewingIndex - 1);
  }

  forward(): void {
    this.viewing = Math.min(this.cursor, this.viewingIndex + 1, this.k - 1);
  }

  /** Rebuild progress from the server's stored record (refresh mid-flow). */
  static restore(record: SessionRecord, questions: Question[]): UiSessionState {
    const state = new UiSessionState(record.session_id, questions);
    for (const entry of record.answers) {
      state.recorded[entry.pair_index] = entry.choice;
    }
    state.viewing = Math.min(state.cursor, Math.max(state.k - 1, 0));
    if (record.utilities && Object.keys(record.utilities).length === 3) {
      state.utilities = record.utilities as UtilitiesByEstimator;
    }
    state.portfolio = record.portfolio ?? null;
    return state;
  }
}
