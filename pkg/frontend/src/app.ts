/** Single-page controller: wires the API client, session state and views.
 *
 * The session id lives in the URL hash so a refresh resumes the same
 * session from server state. All displayed numbers come from the service.
 */

import { AdvisorClient, ApiRequestError } from "./api.js";
import { UiSessionState } from "./state.js";
import type { Choice, Estimator, LotteryJson, Question } from "./types.js";
import {
  renderError,
  renderPortfolio,
  renderPortfolioForm,
  renderUtilities,
  renderWizard,
} from "./views.js";

export interface AppOptions {
  method?: "spq" | "random";
  k?: number;
  defaultBudget?: number;
  defaultCap?: number;
}

export class AdvisorApp {
  state: UiSessionState | null = null;
  private estimator: Estimator = "neutral";
  private budget: number;
  private cap: number;
  private lastError = "";
  private pending: Promise<void> = Promise.resolve();

  constructor(
    private readonly root: HTMLElement,
    private readonly client: AdvisorClient,
    private readonly options: AppOptions = {},
  ) {
    this.budget = options.defaultBudget ?? 10_000;
    this.cap = options.defaultCap ?? 0.4;
    root.addEventListener("click", (event) => void this.enqueue(() => this.onClick(event)));
    root.addEventListener("submit", (event) => {
      event.preventDefault(); // before any async hop, or the form navigates
      void this.enqueue(() => this.onSubmit(event));
    });
  }

  /** Serialize async work so tests (and rapid clicks) see a settled app. */
  private enqueue(work: () => Promise<void>): Promise<void> {
    this.pending = this.pending.then(work);
    return this.pending;
  }

  whenIdle(): Promise<void> {
    return this.pending;
  }

  start(sessionId?: string): Promise<void> {
    return this.enqueue(async () => {
      try {
        if (sessionId) {
          await this.resume(sessionId);
        } else {
          const created = await this.client.createSession(
            this.options.method ?? "spq",
            this.options.k,
          );
          this.state = new UiSessionState(created.session_id, created.questions);
          this.publishSessionId(created.session_id);
        }
        await this.advance();
      } catch (error) {
        this.fail(error);
      }
    });
  }

  private publishSessionId(sessionId: string): void {
    if (typeof window !== "undefined" && window.location) {
      window.location.hash = sessionId;
    }
  }

  private async resume(sessionId: string): Promise<void> {
    const record = await this.client.getSession(sessionId);
    const items = await this.client.getItems();
    const byId = new Map<string, LotteryJson>(items.items.map((it) => [it.id, it]));
    const questions: Question[] = record.questionnaire.pairs.map((pair, index) => {
      const first = byId.get(pair.first);
      const second = byId.get(pair.second);
      if (!first || !second) throw new Error(`unknown item in pair ${index}`);
      return { index, first, second };
    });
    this.state = UiSessionState.restore(record, questions);
  }

  /** Move the pipeline forward as far as the recorded answers allow. */
  private async advance(): Promise<void> {
    const state = this.state;
    if (!state) return;
    if (state.complete && !state.utilities) {
      const result = await this.client.elicit(state.sessionId);
      state.utilities = result.utilities;
    }
    this.render();
  }

  private async onClick(event: Event): Promise<void> {
    const target = (event.target as HTMLElement | null)?.closest(
      "[data-choice],[data-nav],[data-estimator-choice],[data-retry]",
    ) as HTMLElement | null;
    const state = this.state;
    if (!target || !state) return;
    try {
      if (target.dataset.retry !== undefined) {
        this.lastError = "";
        await this.advance();
        return;
      }
      if (target.dataset.nav === "back") {
        state.back();
        this.render();
        return;
      }
      if (target.dataset.nav === "forward") {
        state.forward();
        this.render();
        return;
      }
      if (target.dataset.choice) {
        const index = state.viewingIndex;
        if (index < state.cursor) return; // review screens are read-only
        const choice = target.dataset.choice as Choice;
        state.record(index, choice);
        await this.client.postAnswers(state.sessionId, [
          { pair_index: index, choice },
        ]);
        await this.advance();
        return;
      }
      if (target.dataset.estimatorChoice) {
        this.estimator = target.dataset.estimatorChoice as Estimator;
        if (state.portfolio) {
          state.portfolio = await this.client.recommend(
            state.sessionId,
            this.budget,
            this.cap,
            this.estimator,
          );
        }
        this.render();
      }
    } catch (error) {
      this.fail(error);
    }
  }

  private async onSubmit(event: Event): Promise<void> {
    const form = event.target as HTMLFormElement;
    const state = this.state;
    if (!state || !form.classList.contains("portfolio-form")) return;
    const data = new FormData(form);
    this.budget = Number(data.get("budget"));
    this.cap = Number(data.get("cap"));
    try {
      state.portfolio = await this.client.recommend(
        state.sessionId,
        this.budget,
        this.cap,
        this.estimator,
      );
      this.render();
    } catch (error) {
      this.fail(error);
    }
  }

  private fail(error: unknown): void {
    const message =
      error instanceof ApiRequestError
        ? `${error.code}: ${error.message}`
        : String(error);
    this.lastError = message;
    this.render();
  }

  render(): void {
    const state = this.state;
    if (!state) {
      this.root.innerHTML = renderError(this.lastError || "no session");
      return;
    }
    const parts: string[] = [];
    if (this.lastError) parts.push(renderError(this.lastError));
    if (!state.complete) {
      parts.push(renderWizard(state));
    } else if (state.utilities) {
      parts.push(renderUtilities(state.utilities));
      parts.push(renderPortfolioForm(this.budget, this.cap, this.estimator));
      if (state.portfolio) parts.push(renderPortfolio(state.portfolio));
    } else {
      parts.push(`<p class="busy">computing utilities…</p>`);
    }
    this.root.innerHTML = parts.join("\n");
  }
}
