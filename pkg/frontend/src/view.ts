// DOM rendering for a session state: one card per chain variable with
// probability bars, observed markers, and a highlight on the variable
// the plan wants next.  Every number is rendered from the server value;
// the full-precision figure is kept in a data attribute so nothing is
// lost to display rounding.

import { SessionState } from "./api.js";

function bar(prob: number, highlight: boolean): string {
  const pct = Math.round(prob * 1000) / 10;
  const fill = highlight ? "#2563eb" : "#64748b";
  return `
    <div class="bar-row" style="display:flex;gap:8px;align-items:center;margin:2px 0;">
      <div style="flex:1;height:12px;background:#e2e8f0;border-radius:6px;overflow:hidden;">
        <div class="bar-fill" data-prob="${prob}"
             style="width:${pct}%;height:100%;background:${fill};"></div>
      </div>
      <div class="bar-label" style="width:64px;text-align:right;font-variant-numeric:tabular-nums;">
        ${pct.toFixed(1)}%</div>
    </div>`;
}

export function renderStatus(state: SessionState): string {
  return [
    `budget ${state.spent_budget}/${state.budget} spent`,
    `remaining ${state.remaining_budget}`,
    `expected value ${state.expected_value}`,
    `realized reward so far ${state.realized_reward}`,
    `mode ${state.mode}`,
  ].join(" · ");
}

export function renderChain(state: SessionState): string {
  const cards: string[] = [];
  for (let j = 1; j <= state.n; j++) {
    const observed = state.evidence[String(j)];
    const isNext = state.next_index === j;
    const probs = state.posteriors[j - 1];
    const marks: string[] = [];
    if (observed !== undefined) marks.push(`observed = ${observed}`);
    if (isNext) marks.push("next query");
    cards.push(`
      <div class="variable-card${isNext ? " next-query" : ""}${observed !== undefined ? " observed" : ""}"
           data-index="${j}"
           style="border:1px solid ${isNext ? "#2563eb" : "#cbd5e1"};border-radius:8px;
                  padding:8px;margin:6px 0;${isNext ? "box-shadow:0 0 0 2px #bfdbfe;" : ""}">
        <div style="display:flex;justify-content:space-between;">
          <strong>X${j}</strong>
          <span class="marks" style="color:${isNext ? "#2563eb" : "#475569"};">
            ${marks.join(" · ")}</span>
        </div>
        ${probs.map((p) => bar(p, isNext)).join("")}
      </div>`);
  }
  return cards.join("");
}

export function render(root: HTMLElement, state: SessionState): void {
  const statusEl = root.querySelector("#status") as HTMLElement;
  const chainEl = root.querySelector("#chain") as HTMLElement;
  const formEl = root.querySelector("#answer-form") as HTMLElement;
  const doneEl = root.querySelector("#done-note") as HTMLElement;
  const queryEl = root.querySelector("#query-index") as HTMLElement;
  const stateInput = root.querySelector("#answer-state") as HTMLInputElement;
  statusEl.textContent = renderStatus(state);
  chainEl.innerHTML = renderChain(state);
  if (state.done) {
    formEl.classList.add("hidden");
    doneEl.classList.remove("hidden");
    doneEl.textContent =
      `Plan finished: queried [${state.queried.join(", ")}], ` +
      `spent ${state.spent_budget} of ${state.budget}.`;
  } else {
    formEl.classList.remove("hidden");
    doneEl.classList.add("hidden");
    queryEl.textContent = String(state.next_index);
    const domain = state.domains[(state.next_index as number) - 1];
    stateInput.max = String(domain - 1);
    stateInput.min = "0";
    stateInput.value = "";
  }
}
