/** Typed client for the dialog-engine HTTP API. All console features go
 * through this module; nothing else touches the network. */

export interface UserGoal {
  constraints: Record<string, Record<string, string>>;
  requested?: Record<string, string[]>;
  booking?: Record<string, Record<string, string>>;
}

export interface SessionInfo {
  session_id: string;
  domains: string[];
  strategies_used: Record<string, string>;
}

export interface CritiqueEntry {
  author_agent: string;
  target_agent: string;
  text: string;
  rationale: string;
}

export interface TurnRecord {
  user_utterance: string;
  belief_state: Record<string, Record<string, string>>;
  system_action: string;
  system_response: string;
  critiques: CritiqueEntry[];
  db_result_count?: number;
}

export interface OpenTurnReply {
  closed: false;
  turn_index: number;
  turn: TurnRecord;
}

export interface ClosedReply {
  closed: true;
  outcome: "success" | "failure";
  inform: boolean;
  success: boolean;
  turns: number;
  recorded: boolean;
  dialog_id?: number;
  detail?: string;
}

export type TurnReply = OpenTurnReply | ClosedReply;

export interface BankRecord {
  id: string;
  agent_type: "DST" | "DP" | "NLG";
  domains: string[];
  content: string;
  reason: string;
  h_plus: number;
  h_minus: number;
  n_used: number;
  generation: number;
  alive: boolean;
  fitness: number | null;
}

export interface Analytics {
  entropy_bits: number | null;
  mean_pairwise_similarity: number | null;
  mean_alive_fitness: number | null;
  avg_generation_per_agent_type: Record<string, number>;
  counts: {
    alive_strategies: number;
    total_strategies: number;
    trajectories: number;
    epochs: number;
    open_sessions: number;
  };
}

export interface EpochReport {
  epoch_index: number;
  operations: Array<Record<string, unknown>>;
  measured_p: number;
  measured_mu: number;
  population_before: number;
  population_after: number;
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export interface ClientOptions {
  baseUrl?: string;
  token?: string;
  fetchImpl?: FetchLike;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly token?: string;
  private readonly fetchImpl: FetchLike;

  constructor(options: ClientOptions = {}) {
    this.baseUrl = (options.baseUrl ?? "").replace(/\/+$/, "");
    this.token = options.token;
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (body !== undefined) headers["Content-Type"] = "application/json";
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    const resp = await this.fetchImpl(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const parsed = (await resp.json()) as { detail?: string };
        if (parsed.detail) detail = parsed.detail;
      } catch {
        /* non-JSON error body; keep the status text */
      }
      throw new ApiError(resp.status, detail);
    }
    if (resp.status === 204) return undefined as T;
    return (await resp.json()) as T;
  }

  createSession(goal: UserGoal): Promise<SessionInfo> {
    return this.request("POST", "/sessions", { goal });
  }

  sendTurn(sessionId: string, utterance: string): Promise<TurnReply> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/turns`, {
      utterance,
    });
  }

  endSession(sessionId: string): Promise<ClosedReply> {
    return this.sendTurn(sessionId, "/end") as Promise<ClosedReply>;
  }

  deleteSession(sessionId: string): Promise<void> {
    return this.request("DELETE", `/sessions/${encodeURIComponent(sessionId)}`);
  }

  getBank(filter?: {
    agentType?: string;
    domains?: string[];
    includeDead?: boolean;
  }): Promise<BankRecord[]> {
    const params = new URLSearchParams();
    if (filter?.agentType) params.set("agent_type", filter.agentType);
    for (const d of filter?.domains ?? []) params.append("domain", d);
    if (filter?.includeDead) params.set("include_dead", "true");
    const query = params.toString();
    return this.request("GET", `/bank${query ? `?${query}` : ""}`);
  }

  getAnalytics(): Promise<Analytics> {
    return this.request("GET", "/analytics");
  }

  triggerEvolution(): Promise<EpochReport> {
    return this.request("POST", "/evolve");
  }

  getEpochs(): Promise<EpochReport[]> {
    return this.request("GET", "/epochs");
  }
}
