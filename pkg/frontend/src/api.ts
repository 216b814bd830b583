// Typed client for the plan-session HTTP protocol.
// The console never computes probabilities; everything displayed comes
// from the SessionState payloads returned here.

export interface SessionState {
  id: string;
  done: boolean;
  next_index: number | null;
  remaining_budget: number;
  spent_budget: number;
  evidence: Record<string, number>;
  queried: number[];
  posteriors: number[][];
  realized_reward: number;
  expected_value: number;
  n: number;
  domains: number[];
  mode: string;
  budget: number;
}

export class ServerError extends Error {
  code: string;
  field?: string;
  status: number;

  constructor(status: number, code: string, message: string, field?: string) {
    super(message);
    this.status = status;
    this.code = code;
    this.field = field;
  }
}

export class ConnectionError extends Error {}

async function request(url: string, init?: RequestInit): Promise<any> {
  let response: Response;
  try {
    response = await fetch(url, init);
  } catch (err) {
    throw new ConnectionError(`cannot reach server at ${url}: ${err}`);
  }
  if (response.status === 204) return null;
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail = body?.error ?? {};
    throw new ServerError(
      response.status,
      detail.code ?? "server_error",
      detail.message ?? `server returned ${response.status}`,
      detail.field,
    );
  }
  return body;
}

export class SessionApi {
  constructor(private baseUrl: string) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
  }

  startFromPath(planPath: string): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ plan_path: planPath }),
    });
  }

  startFromDocument(plan: object): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ plan }),
    });
  }

  answer(id: string, index: number, state: number): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${id}/answer`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ index, state }),
    });
  }

  get(id: string): Promise<SessionState> {
    return request(`${this.baseUrl}/sessions/${id}`);
  }

  remove(id: string): Promise<null> {
    return request(`${this.baseUrl}/sessions/${id}`, { method: "DELETE" });
  }
}
