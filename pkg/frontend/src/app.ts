/** DOM wiring for the dashboard. All analysis numbers come from the
 * controller's view models; this file only renders them. */

import { GatewayClient, type Action } from "./api.js";
import { SessionController, type SessionView } from "./controller.js";
import { actionLabel, type PreviewCard } from "./views.js";

const params = new URLSearchParams(window.location.search);
const baseUrl = params.get("gateway") ?? "";
const client = new GatewayClient(baseUrl);

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function bar(widthPct: number): string {
  return `<span class="bar"><span class="fill" style="width:${widthPct}%"></span></span>`;
}

function render(view: SessionView): void {
  el("iteration").textContent = String(view.iteration);
  el("generation").textContent = String(view.generation);
  el("version").textContent = String(view.modelVersion);

  const banner = el("banner");
  banner.textContent = view.banner ?? "";
  banner.style.display = view.banner ? "block" : "none";

  el("picker").style.display = view.sessionMissing ? "block" : "none";

  if (view.indices) {
    el("scenarios").innerHTML = view.indices.scenarios
      .map(
        (row) =>
          `<tr><td>${row.scenario}</td><td>${row.respTimeLabel}</td>` +
          `<td>${row.throughputLabel}</td></tr>`,
      )
      .join("");
    el("services").innerHTML = view.indices.services
      .map(
        (row) =>
          `<tr><td>${row.service}</td><td>${row.utilizationLabel}</td>` +
          `<td>${bar(row.barWidthPct)}</td></tr>`,
      )
      .join("");
  }

  el("occurrences").innerHTML = view.occurrences
    .map(
      (row, index) =>
        `<details ${index === 0 ? "open" : ""}><summary>` +
        `<b>${row.kind}</b> ${row.target} <i>(${row.scenario})</i> ` +
        `${row.probabilityLabel} ${bar(row.barWidthPct)}</summary>` +
        `<table>${row.literals
          .map(
            (literal) =>
              `<tr><td>${literal.metric}</td><td>${literal.element}</td>` +
              `<td>${literal.valueLabel}</td><td>${literal.probabilityLabel}</td></tr>`,
          )
          .join("")}</table></details>`,
    )
    .join("");

  el("candidates").innerHTML = view.candidates
    .map(
      (action, index) =>
        `<li>${actionLabel(action)} ` +
        `<button data-preview="${index}">preview</button> ` +
        `<button data-apply="${index}">apply</button> ` +
        `<label><input type="checkbox" data-scope="${index}"> model only</label>` +
        `<div class="card" id="card-${index}"></div></li>`,
    )
    .join("");

  el("timeline").innerHTML = view.history
    .map(
      (entry) =>
        `<li class="${entry.pending ? "pending" : ""}">` +
        `<b>#${entry.iteration}</b> ${entry.actionLabel ?? "(no action yet)"}` +
        `${entry.pending ? " (measuring...)" : ""}<br>` +
        `<small>${entry.measuredSummary}</small></li>`,
    )
    .join("");
}

function renderCard(card: PreviewCard | { validationError: string }, target: HTMLElement): void {
  if ("validationError" in card) {
    target.innerHTML = `<span class="error">${card.validationError}</span>`;
    return;
  }
  target.innerHTML =
    `<b>${card.actionLabel}</b> (max predicted U ${card.maxUtilizationLabel})` +
    `<table>${card.rows
      .map(
        (row) =>
          `<tr class="${row.improves ? "improves" : "degrades"}">` +
          `<td>${row.scenario}</td><td>${row.beforeLabel}</td>` +
          `<td>→ ${row.afterLabel}</td><td>${row.deltaLabel}</td></tr>`,
      )
      .join("")}</table>`;
}

async function boot(): Promise<void> {
  let sessionId = params.get("session");
  if (!sessionId) {
    const fixture = params.get("fixture");
    if (fixture) {
      const created = await client.createSession({ fixture });
      sessionId = created.session;
    } else {
      const existing = await client.listSessions();
      sessionId = existing.sessions[0] ?? "";
    }
  }
  if (!sessionId) {
    el("picker").style.display = "block";
    return;
  }

  const controller = new SessionController(client, sessionId);
  controller.onChange(render);
  controller.start();
  el("session-id").textContent = sessionId;

  el("candidates").addEventListener("click", (event) => {
    const target = event.target as HTMLElement;
    const previewIndex = target.getAttribute("data-preview");
    const applyIndex = target.getAttribute("data-apply");
    if (previewIndex !== null) {
      const action: Action = controller.view.candidates[Number(previewIndex)];
      void controller
        .preview(action)
        .then((card) => renderCard(card, el(`card-${previewIndex}`)));
    }
    if (applyIndex !== null) {
      const action: Action = controller.view.candidates[Number(applyIndex)];
      const modelOnly = (
        document.querySelector(`input[data-scope="${applyIndex}"]`) as HTMLInputElement
      )?.checked;
      const confirmed = window.confirm(`Apply ${actionLabel(action)}?`);
      void controller.apply(
        action,
        modelOnly ? "MODEL_ONLY" : "MODEL_AND_SYSTEM",
        confirmed,
      );
    }
  });
}

void boot();
