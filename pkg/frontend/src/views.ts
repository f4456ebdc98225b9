/**
 * Pure view-model builders. Every `raw` field is copied verbatim from a
 * gateway response; display strings only format, never recompute, so
 * snapshot tests can trace each rendered number back to its source field.
 */

import type {
  Action,
  HistoryResponse,
  Indices,
  IndicesResponse,
  Occurrence,
  PreviewResponse,
} from "./api.js";

export interface IndexRow {
  scenario: string;
  raw: { respTimeS: number; throughputPerS: number };
  respTimeLabel: string;
  throughputLabel: string;
}

export interface UtilizationRow {
  service: string;
  raw: { utilization: number };
  utilizationLabel: string;
  barWidthPct: number;
}

export interface IndicesView {
  iteration: number;
  scenarios: IndexRow[];
  services: UtilizationRow[];
}

const seconds = (value: number): string => `${(value * 1000).toFixed(1)} ms`;
const perSecond = (value: number): string => `${value.toFixed(2)}/s`;
// probabilities are shown with two decimals plus a bar
const probability = (value: number): string => value.toFixed(2);
const pct = (value: number): number => Math.max(0, Math.min(100, Math.round(value * 100)));

export function indicesView(response: IndicesResponse): IndicesView {
  const scenarios = Object.keys(response.indices.scenarios)
    .sort()
    .map((name) => {
      const entry = response.indices.scenarios[name];
      return {
        scenario: name,
        raw: { respTimeS: entry.resp_time_s, throughputPerS: entry.throughput_per_s },
        respTimeLabel: seconds(entry.resp_time_s),
        throughputLabel: perSecond(entry.throughput_per_s),
      };
    });
  const services = Object.keys(response.indices.services)
    .sort()
    .map((name) => {
      const entry = response.indices.services[name];
      return {
        service: name,
        raw: { utilization: entry.utilization },
        utilizationLabel: probability(entry.utilization),
        barWidthPct: pct(entry.utilization),
      };
    });
  return { iteration: response.iteration, scenarios, services };
}

export interface LiteralRow {
  metric: string;
  element: string;
  raw: { value: number; p: number };
  valueLabel: string;
  probabilityLabel: string;
}

export interface OccurrenceRow {
  kind: string;
  target: string;
  scenario: string;
  raw: { probability: number };
  probabilityLabel: string;
  barWidthPct: number;
  literals: LiteralRow[];
}

export function occurrenceRows(occurrences: Occurrence[]): OccurrenceRow[] {
  return occurrences.map((occurrence) => ({
    kind: occurrence.kind,
    target: occurrence.target,
    scenario: occurrence.scenario,
    raw: { probability: occurrence.probability },
    probabilityLabel: probability(occurrence.probability),
    barWidthPct: pct(occurrence.probability),
    literals: occurrence.literals.map((literal) => ({
      metric: literal.metric,
      element: literal.element,
      raw: { value: literal.value, p: literal.p },
      valueLabel:
        Number.isInteger(literal.value) ? String(literal.value) : literal.value.toFixed(3),
      probabilityLabel: probability(literal.p),
    })),
  }));
}

export function actionLabel(action: Action): string {
  return action.kind === "CLONE" ? `clone(${action.target})` : `moveop(${action.target})`;
}

export interface DeltaRow {
  scenario: string;
  raw: { beforeS: number; afterS: number; deltaS: number };
  beforeLabel: string;
  afterLabel: string;
  deltaLabel: string; // signed
  improves: boolean;
}

export interface PreviewCard {
  actionLabel: string;
  rows: DeltaRow[];
  raw: { maxPredictedUtilization: number };
  maxUtilizationLabel: string;
}

export function previewCard(response: PreviewResponse): PreviewCard {
  const rows = Object.keys(response.scenarios)
    .sort()
    .map((name) => {
      const entry = response.scenarios[name];
      const signed = entry.delta_resp_time_s >= 0 ? "+" : "−";
      return {
        scenario: name,
        raw: {
          beforeS: entry.baseline_resp_time_s,
          afterS: entry.resp_time_s,
          deltaS: entry.delta_resp_time_s,
        },
        beforeLabel: seconds(entry.baseline_resp_time_s),
        afterLabel: seconds(entry.resp_time_s),
        deltaLabel: `${signed}${seconds(Math.abs(entry.delta_resp_time_s))}`,
        improves: entry.delta_resp_time_s < 0,
      };
    });
  return {
    actionLabel: actionLabel(response.action),
    rows,
    raw: { maxPredictedUtilization: response.max_predicted_utilization },
    maxUtilizationLabel: probability(response.max_predicted_utilization),
  };
}

export interface TimelineEntry {
  iteration: number;
  actionLabel: string | null;
  raw: { measured: Indices; postMeasured: Indices | null };
  measuredSummary: string;
  pending: boolean;
}

function summarize(indices: Indices): string {
  const parts = Object.keys(indices.scenarios)
    .sort()
    .map((name) => `${name}: ${seconds(indices.scenarios[name].resp_time_s)}`);
  return parts.join(", ");
}

export function timeline(response: HistoryResponse): TimelineEntry[] {
  return response.history.map((record) => ({
    iteration: record.iteration,
    actionLabel: record.action
      ? record.action.kind === ("MULTIPLE" as string)
        ? (record.action.actions ?? []).map(actionLabel).join(" + ")
        : actionLabel(record.action)
      : null,
    raw: { measured: record.measured, postMeasured: record.post_action_measured },
    measuredSummary: summarize(record.measured),
    pending: record.action !== null && record.post_action_measured === null,
  }));
}
