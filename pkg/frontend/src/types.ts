/** Wire formats of the advisor `/v1` API. */

export interface Outcome {
  value: number;
  prob: number;
}

export interface LotteryJson {
  id: string;
  label: string;
  outcomes: Outcome[];
}

export interface Question {
  index: number;
  first: LotteryJson;
  second: LotteryJson;
}

export interface CreateSessionResponse {
  session_id: string;
  questions: Question[];
}

export type Choice = "first" | "second" | "none";

export interface AnswerEntry {
  pair_index: number;
  choice: Choice;
}

export interface RiskPoint {
  breakpoint: number;
  value: number | null;
}

export interface UtilityPayload {
  grid: number[];
  alpha: number[];
  beta: number[];
  estimator: string;
  objective: number;
  gini: number;
  ara: RiskPoint[];
  rra: RiskPoint[];
}

export type Estimator = "pessimistic" | "optimistic" | "neutral";

export type UtilitiesByEstimator = Record<Estimator, UtilityPayload>;

export interface WealthPoint {
  date: string;
  wealth: number;
}

export interface PortfolioPayload {
  estimator: string;
  budget: number;
  assets: string[];
  allocation: number[];
  objective: number;
  wealth_preview: WealthPoint[];
}

export interface SessionRecord {
  session_id: string;
  status: "questioning" | "answered" | "elicited" | "recommended";
  questionnaire: { pairs: { first: string; second: string }[] };
  answers: AnswerEntry[];
  utilities: Partial<UtilitiesByEstimator>;
  portfolio: PortfolioPayload | null;
}

export interface ApiError {
  code: string;
  message: string;
  details: Record<string, unknown>;
}
