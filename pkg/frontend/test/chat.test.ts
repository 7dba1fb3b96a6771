import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { ChatSession, ChatState } from "../src/chat.js";
import { stubFetch } from "./helpers.js";

const GOAL = { constraints: { hotel: { area: "north" } } };

function sessionRoutes(turnReply?: object) {
  return {
    "POST /sessions": () => ({
      status: 201,
      body: { session_id: "sid1", domains: ["hotel"], strategies_used: { DST: "s1", DP: "s2", NLG: "s3" } },
    }),
    "POST /sessions/sid1/turns": () => ({
      body: turnReply ?? {
        closed: false,
        turn_index: 0,
        turn: {
          user_utterance: "hi",
          belief_state: { hotel: { area: "north" } },
          system_action: "recommend(entity)",
          system_response: "i recommend the grand .",
          critiques: [
            { author_agent: "DP", target_agent: "DST", text: "", rationale: "fine" },
            { author_agent: "UserSim", target_agent: "NLG", text: "too short", rationale: "r" },
          ],
          db_result_count: 1,
        },
      },
    }),
    "DELETE /sessions/sid1": () => ({ status: 204 }),
  };
}

function makeChat(routes: ReturnType<typeof sessionRoutes>) {
  const { fetchImpl } = stubFetch(routes);
  const states: ChatState[] = [];
  const chat = new ChatSession(new ApiClient({ fetchImpl }), (s) => states.push(s));
  return { chat, states };
}

describe("ChatSession", () => {
  it("opens a session and exposes the strategy assignment", async () => {
    const { chat } = makeChat(sessionRoutes());
    await chat.open(GOAL);
    const state = chat.getState();
    expect(state.status).toBe("open");
    expect(state.sessionId).toBe("sid1");
    expect(state.strategies).toEqual({ DST: "s1", DP: "s2", NLG: "s3" });
    expect(state.domains).toEqual(["hotel"]);
  });

  it("records turns with diagnostics and drops empty critiques", async () => {
    const { chat } = makeChat(sessionRoutes());
    await chat.open(GOAL);
    await chat.send("hi");
    const [turn] = chat.getState().turns;
    expect(turn.response).toBe("i recommend the grand .");
    expect(turn.diagnostics.systemAction).toBe("recommend(entity)");
    expect(turn.diagnostics.dbResultCount).toBe(1);
    expect(turn.diagnostics.critiques).toEqual([
      { author: "UserSim", target: "NLG", text: "too short" },
    ]);
  });

  it("transitions to closed when the server closes the dialog", async () => {
    const { chat } = makeChat(sessionRoutes({
      closed: true, outcome: "failure", inform: false, success: false,
      turns: 1, recorded: true, detail: "turn limit reached",
    }));
    await chat.open(GOAL);
    await chat.send("hi");
    const state = chat.getState();
    expect(state.status).toBe("closed");
    expect(state.result?.outcome).toBe("failure");
  });

  it("ends a session and keeps the scored result", async () => {
    const routes = sessionRoutes();
    routes["POST /sessions/sid1/turns"] = () => ({
      body: { closed: true, outcome: "success", inform: true, success: true,
              turns: 0, recorded: false },
    });
    const { chat } = makeChat(routes);
    await chat.open(GOAL);
    const result = await chat.end();
    expect(result?.outcome).toBe("success");
    expect(chat.getState().status).toBe("closed");
  });

  it("rejects turns without an open session", async () => {
    const { chat } = makeChat(sessionRoutes());
    await expect(chat.send("hi")).rejects.toThrow("no open session");
  });

  it("rejects opening twice", async () => {
    const { chat } = makeChat(sessionRoutes());
    await chat.open(GOAL);
    await expect(chat.open(GOAL)).rejects.toThrow("already open");
  });

  it("treats a 409 as recoverable and stays open", async () => {
    const routes = sessionRoutes();
    let calls = 0;
    routes["POST /sessions/sid1/turns"] = () => {
      calls += 1;
      return calls === 1
        ? { status: 409, body: { detail: "a turn is already in flight for this session" } }
        : { body: { closed: true, outcome: "success", inform: true, success: true, turns: 1, recorded: true } };
    };
    const { chat } = makeChat(routes);
    await chat.open(GOAL);
    await chat.send("hi");
    expect(chat.getState().status).toBe("open");
    expect(chat.getState().error).toContain("in flight");
    await chat.send("again");
    expect(chat.getState().status).toBe("closed");
  });

  it("discard deletes the server session and resets", async () => {
    const { chat } = makeChat(sessionRoutes());
    await chat.open(GOAL);
    await chat.discard();
    expect(chat.getState().status).toBe("idle");
    expect(chat.getState().turns).toEqual([]);
  });

  it("notifies the observer on every transition", async () => {
    const { chat, states } = makeChat(sessionRoutes());
    await chat.open(GOAL);
    await chat.send("hi");
    expect(states.map((s) => s.status)).toEqual(["busy", "open", "busy", "open"]);
  });
});
