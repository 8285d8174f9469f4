/** Pure render functions: state in, HTML/SVG strings out.
 *
 * Every number shown comes verbatim from a service payload (String(x) of
 * the parsed JSON value, also mirrored in data-* attributes); the views do
 * no arithmetic on utilities or allocations beyond pixel placement.
 */

import type {
  Estimator,
  PortfolioPayload,
  Question,
  UtilitiesByEstimator,
  UtilityPayload,
} from "./types.js";
import type { UiSessionState } from "./state.js";

export const ESTIMATORS: Estimator[] = ["pessimistic", "optimistic", "neutral"];

const CURVE_COLORS: Record<Estimator, string> = {
  pessimistic: "#c0662c",
  optimistic: "#2c7fb8",
  neutral: "#111111",
};

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function lotteryCard(side: "first" | "second", label: string, picked: boolean): string {
  return `<button class="option${picked ? " picked" : ""}" data-choice="${side}">
    <span class="side">${side === "first" ? "A" : "B"}</span>
    <span class="label">${escapeHtml(label)}</span>
  </button>`;
}

export function renderWizard(state: UiSessionState): string {
  const index = state.viewingIndex;
  const question = state.questions[index];
  if (!question) return `<section class="wizard empty">no questions</section>`;
  const recorded = state.choiceAt(index);
  const review = index < state.cursor;
  const progress = `Question ${index + 1} of ${state.k}`;
  return `<section class="wizard" data-screen="${index}" data-answered="${state.cursor}">
  <header>
    <h2>Choose the one you prefer</h2>
    <span class="progress">${progress}</span>
  </header>
  <div class="pair">
    ${lotteryCard("first", question.first.label, recorded === "first")}
    ${lotteryCard("second", question.second.label, recorded === "second")}
  </div>
  <button class="option none${recorded === "none" ? " picked" : ""}" data-choice="none">
    No preference
  </button>
  <nav>
    <button data-nav="back" ${index === 0 ? "disabled" : ""}>Back</button>
    ${review ? `<button data-nav="forward">Forward</button>` : ""}
    ${review ? `<span class="note">already answered; recorded choices are final</span>` : ""}
  </nav>
</section>`;
}

function curvePath(u: UtilityPayload, upper: number, width: number, height: number): string {
  const points = u.grid.map((y, j) => {
    const px = (y / upper) * width;
    const py = height - (u.alpha[j] ?? 0) * height;
    return `${px.toFixed(2)},${py.toFixed(2)}`;
  });
  return points.join(" ");
}

export function renderUtilities(utilities: UtilitiesByEstimator): string {
  const width = 480;
  const height = 280;
  const neutral = utilities.neutral;
  const upper = neutral.grid[neutral.grid.length - 1] ?? 1;
  const band = [
    ...utilities.pessimistic.grid.map((y, j) => {
      const px = (y / upper) * width;
      return `${px.toFixed(2)},${(height - (utilities.pessimistic.alpha[j] ?? 0) * height).toFixed(2)}`;
    }),
    ...[...utilities.optimistic.grid].reverse().map((y, jr) => {
      const j = utilities.optimistic.grid.length - 1 - jr;
      const px = (y / upper) * width;
      return `${px.toFixed(2)},${(height - (utilities.optimistic.alpha[j] ?? 0) * height).toFixed(2)}`;
    }),
  ].join(" ");
  const curves = ESTIMATORS.map((name) => {
    const u = utilities[name];
    return `<polyline class="curve ${name}" fill="none"
      stroke="${CURVE_COLORS[name]}" stroke-width="${name === "neutral" ? 3 : 1.5}"
      data-estimator="${name}"
      data-grid='${JSON.stringify(u.grid)}'
      data-alpha='${JSON.stringify(u.alpha)}'
      points="${curvePath(u, upper, width, height)}" />`;
  }).join("\n    ");
  const rows = ESTIMATORS.map((name) => {
    const u = utilities[name];
    return `<tr data-estimator="${name}">
      <td>${name}</td>
      <td data-gini="${String(u.gini)}">${String(u.gini)}</td>
      <td data-objective="${String(u.objective)}">${String(u.objective)}</td>
    </tr>`;
  }).join("\n      ");
  const riskRows = neutral.ara
    .map((point, i) => {
      const rra = neutral.rra[i];
      const fmt = (v: number | null) => (v === null ? "n/a" : String(v));
      return `<tr>
      <td>${String(point.breakpoint)}</td>
      <td data-ara="${fmt(point.value)}">${fmt(point.value)}</td>
      <td data-rra="${fmt(rra ? rra.value : null)}">${fmt(rra ? rra.value : null)}</td>
    </tr>`;
    })
    .join("\n      ");
  return `<section class="utilities" data-upper="${String(upper)}">
  <h2>Elicited utility</h2>
  <svg viewBox="0 0 ${width} ${height}" role="img" aria-label="utility curves">
    <polygon class="band" points="${band}" fill="#9ecae1" opacity="0.25" />
    ${curves}
  </svg>
  <table class="summary">
    <thead><tr><th>estimator</th><th>gini</th><th>objective</th></tr></thead>
    <tbody>
      ${rows}
    </tbody>
  </table>
  <table class="risk">
    <thead><tr><th>breakpoint</th><th>ARA</th><th>RRA</th></tr></thead>
    <tbody>
      ${riskRows}
    </tbody>
  </table>
</section>`;
}

export function renderPortfolioForm(budget: number, cap: number, estimator: Estimator): string {
  const switcher = ESTIMATORS.map(
    (name) =>
      `<button data-estimator-choice="${name}" class="${name === estimator ? "active" : ""}">${name}</button>`,
  ).join(" ");
  return `<form class="portfolio-form">
  <label>Budget <input name="budget" type="number" step="any" value="${String(budget)}"></label>
  <label>Cap per asset (fraction) <input name="cap" type="number" step="any" value="${String(cap)}"></label>
  <div class="estimators">${switcher}</div>
  <button type="submit">Recommend</button>
</form>`;
}

export function renderPortfolio(payload: PortfolioPayload): string {
  const total = payload.budget;
  const bars = payload.assets
    .map((asset, i) => {
      const amount = payload.allocation[i] ?? 0;
      const pct = total > 0 ? (100 * amount) / total : 0;
      return `<div class="bar" data-asset="${escapeHtml(asset)}" data-amount="${String(amount)}">
      <span class="asset">${escapeHtml(asset)}</span>
      <span class="fill" style="width: ${pct.toFixed(2)}%"></span>
      <span class="amount">${String(amount)}</span>
    </div>`;
    })
    .join("\n    ");
  const preview = payload.wealth_preview;
  const width = 480;
  const height = 160;
  let path = "";
  if (preview.length > 0) {
    const values = preview.map((p) => p.wealth);
    const lo = Math.min(...values, payload.budget);
    const hi = Math.max(...values, payload.budget);
    const span = hi - lo || 1;
    path = preview
      .map((p, i) => {
        const px = (i / Math.max(preview.length - 1, 1)) * width;
        const py = height - ((p.wealth - lo) / span) * height;
        return `${px.toFixed(2)},${py.toFixed(2)}`;
      })
      .join(" ");
  }
  return `<section class="portfolio" data-estimator="${escapeHtml(payload.estimator)}"
  data-budget="${String(payload.budget)}" data-objective="${String(payload.objective)}">
  <h2>Recommended allocation (${escapeHtml(payload.estimator)})</h2>
  <div class="bars">
    ${bars}
  </div>
  <p>Attained average utility: <span class="objective">${String(payload.objective)}</span></p>
  <svg viewBox="0 0 ${width} ${height}" role="img" aria-label="wealth preview">
    <polyline fill="none" stroke="#2c7fb8" stroke-width="1.5" points="${path}" />
  </svg>
</section>`;
}

export function renderError(message: string): string {
  return `<div class="error" role="alert">${escapeHtml(message)} <button data-retry>Retry</button></div>`;
}
