// Wiring for the plan console: one session per page, server-driven.
// All probabilities and rewards shown come from the server; the only
// client-side logic is input validation before an answer is sent.

import { ConnectionError, ServerError, SessionApi, SessionState } from "./api.js";
import { render } from "./view.js";

export class PlanConsole {
  api: SessionApi | null = null;
  state: SessionState | null = null;

  constructor(private root: HTMLElement) {
    const startBtn = root.querySelector("#start") as HTMLElement;
    startBtn.addEventListener("click", (event) => {
      event.preventDefault();
      void this.startSession();
    });
    const answerBtn = root.querySelector("#submit-answer") as HTMLElement;
    answerBtn.addEventListener("click", (event) => {
      event.preventDefault();
      void this.submitFromForm();
    });
  }

  private input(selector: string): HTMLInputElement {
    return this.root.querySelector(selector) as HTMLInputElement;
  }

  private banner(message: string | null): void {
    const el = this.root.querySelector("#banner") as HTMLElement;
    if (message === null) {
      el.classList.add("hidden");
      el.textContent = "";
    } else {
      el.classList.remove("hidden");
      el.textContent = message;
    }
  }

  async startSession(): Promise<void> {
    const server = this.input("#server").value.trim();
    const planPath = this.input("#plan-path").value.trim();
    const api = new SessionApi(server);
    this.banner(null);
    try {
      const state = await api.startFromPath(planPath);
      this.api = api;
      this.applyState(state);
    } catch (err) {
      // No partial state: the session panel stays hidden on failure.
      this.api = null;
      this.state = null;
      (this.root.querySelector("#session") as HTMLElement).classList.add("hidden");
      if (err instanceof ConnectionError) {
        this.banner(`connection error: ${err.message}`);
      } else if (err instanceof ServerError) {
        this.banner(`server error [${err.code}]: ${err.message}`);
      } else {
        this.banner(String(err));
      }
    }
  }

  private applyState(state: SessionState): void {
    this.state = state;
    (this.root.querySelector("#session") as HTMLElement).classList.remove("hidden");
    render(this.root, state);
  }

  async submitFromForm(): Promise<void> {
    if (!this.state || this.state.done) return;
    const raw = this.input("#answer-state").value;
    await this.submitAnswer(this.state.next_index as number, Number(raw));
  }

  async submitAnswer(index: number, state: number): Promise<void> {
    if (!this.api || !this.state) return;
    this.banner(null);
    // Client-side validation: stale indices and out-of-range states are
    // rejected before anything is sent.
    if (this.state.done) {
      this.banner("validation error: the plan has already finished");
      return;
    }
    if (index !== this.state.next_index) {
      this.banner(
        `validation error: expected an answer for X${this.state.next_index}, got X${index}`);
      return;
    }
    const domain = this.state.domains[index - 1];
    if (!Number.isInteger(state) || state < 0 || state >= domain) {
      this.banner(`validation error: state must be an integer in 0..${domain - 1}`);
      return;
    }
    try {
      const next = await this.api.answer(this.state.id, index, state);
      this.applyState(next);
    } catch (err) {
      if (err instanceof ServerError) {
        this.banner(`server error [${err.code}]: ${err.message}`);
      } else if (err instanceof ConnectionError) {
        this.banner(`connection error: ${err.message}`);
      } else {
        this.banner(String(err));
      }
    }
  }
}

export const CONSOLE_MARKUP = `
  <form id="connect" style="display:flex;gap:8px;margin-bottom:12px;">
    <input id="server" value="http://127.0.0.1:8321" size="24">
    <input id="plan-path" placeholder="/path/to/plan.json" size="40">
    <button id="start">Start session</button>
  </form>
  <div id="banner" class="banner hidden"
       style="background:#fee2e2;color:#991b1b;padding:8px;border-radius:6px;margin:8px 0;"></div>
  <section id="session" class="hidden">
    <div id="status" style="margin:8px 0;color:#334155;"></div>
    <div id="chain"></div>
    <form id="answer-form" style="display:flex;gap:8px;align-items:center;margin-top:10px;">
      <label>observe X<span id="query-index"></span>:</label>
      <input id="answer-state" type="number" min="0" style="width:72px;">
      <button id="submit-answer">Submit</button>
    </form>
    <div id="done-note" class="hidden" style="margin-top:10px;font-weight:600;"></div>
  </section>
`;

export function mount(root: HTMLElement): PlanConsole {
  root.innerHTML = CONSOLE_MARKUP;
  return new PlanConsole(root);
}
