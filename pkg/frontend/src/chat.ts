/** Chat session state machine: turn history with per-turn diagnostics
 * (belief state, system action, peer critiques, database hit count). */
import {
  ApiClient,
  ApiError,
  ClosedReply,
  TurnRecord,
  UserGoal,
} from "./api.js";

export type ChatStatus = "idle" | "open" | "busy" | "closed" | "error";

export interface ChatTurn {
  user: string;
  response: string;
  diagnostics: {
    beliefState: Record<string, Record<string, string>>;
    systemAction: string;
    critiques: Array<{ author: string; target: string; text: string }>;
    dbResultCount?: number;
  };
}

export interface ChatState {
  status: ChatStatus;
  sessionId?: string;
  strategies: Record<string, string>;
  domains: string[];
  turns: ChatTurn[];
  result?: ClosedReply;
  error?: string;
}

function toChatTurn(user: string, record: TurnRecord): ChatTurn {
  return {
    user,
    response: record.system_response,
    diagnostics: {
      beliefState: record.belief_state,
      systemAction: record.system_action,
      critiques: record.critiques
        .filter((c) => c.text.trim().length > 0)
        .map((c) => ({ author: c.author_agent, target: c.target_agent, text: c.text })),
      dbResultCount: record.db_result_count,
    },
  };
}

export class ChatSession {
  private state: ChatState = { status: "idle", strategies: {}, domains: [], turns: [] };

  constructor(
    private readonly client: ApiClient,
    private readonly onChange: (state: ChatState) => void = () => {},
  ) {}

  getState(): ChatState {
    return this.state;
  }

  private update(patch: Partial<ChatState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async open(goal: UserGoal): Promise<void> {
    if (this.state.status === "open" || this.state.status === "busy") {
      throw new Error("a session is already open");
    }
    this.update({ status: "busy", turns: [], result: undefined, error: undefined });
    try {
      const info = await this.client.createSession(goal);
      this.update({
        status: "open",
        sessionId: info.session_id,
        strategies: info.strategies_used,
        domains: info.domains,
      });
    } catch (err) {
      this.update({ status: "error", error: describe(err) });
      throw err;
    }
  }

  async send(utterance: string): Promise<void> {
    if (this.state.status !== "open" || !this.state.sessionId) {
      throw new Error("no open session");
    }
    this.update({ status: "busy" });
    try {
      const reply = await this.client.sendTurn(this.state.sessionId, utterance);
      if (reply.closed) {
        this.update({ status: "closed", result: reply });
      } else {
        this.update({
          status: "open",
          turns: [...this.state.turns, toChatTurn(utterance, reply.turn)],
        });
      }
    } catch (err) {
      if (err instanceof ApiError && err.status === 409) {
        // turn already in flight or session closed server-side: recoverable
        this.update({ status: "open", error: err.detail });
        return;
      }
      this.update({ status: "error", error: describe(err) });
      throw err;
    }
  }

  async end(): Promise<ClosedReply | undefined> {
    if (this.state.status !== "open" || !this.state.sessionId) return undefined;
    this.update({ status: "busy" });
    const result = await this.client.endSession(this.state.sessionId);
    this.update({ status: "closed", result });
    return result;
  }

  async discard(): Promise<void> {
    if (this.state.sessionId && this.state.status === "open") {
      await this.client.deleteSession(this.state.sessionId);
    }
    this.update({ status: "idle", sessionId: undefined, turns: [], result: undefined });
  }
}

function describe(err: unknown): string {
  return err instanceof Error ? err.message : String(err);
}
