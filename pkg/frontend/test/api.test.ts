import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { stubFetch } from "./helpers.js";

describe("ApiClient", () => {
  it("creates a session with the goal payload", async () => {
    const { fetchImpl, requests } = stubFetch({
      "POST /sessions": (req) => ({
        status: 201,
        body: { session_id: "abc", domains: ["hotel"], strategies_used: { DST: "s1" } },
      }),
    });
    const client = new ApiClient({ fetchImpl });
    const info = await client.createSession({ constraints: { hotel: { area: "north" } } });
    expect(info.session_id).toBe("abc");
    expect(requests[0].body).toEqual({ goal: { constraints: { hotel: { area: "north" } } } });
    expect(requests[0].headers["Content-Type"]).toBe("application/json");
  });

  it("prefixes the base URL and strips trailing slashes", async () => {
    const { fetchImpl, requests } = stubFetch({
      "GET http://host:8000/analytics": () => ({ body: { counts: {} } }),
    });
    const client = new ApiClient({ baseUrl: "http://host:8000/", fetchImpl });
    await client.getAnalytics();
    expect(requests[0].url).toBe("http://host:8000/analytics");
  });

  it("sends the bearer token when configured", async () => {
    const { fetchImpl, requests } = stubFetch({
      "GET /epochs": () => ({ body: [] }),
    });
    const client = new ApiClient({ token: "sekrit", fetchImpl });
    await client.getEpochs();
    expect(requests[0].headers["Authorization"]).toBe("Bearer sekrit");
  });

  it("encodes bank filters as query parameters", async () => {
    const { fetchImpl, requests } = stubFetch({
      "GET /bank?agent_type=DST&domain=hotel&domain=restaurant&include_dead=true":
        () => ({ body: [] }),
    });
    const client = new ApiClient({ fetchImpl });
    await client.getBank({
      agentType: "DST",
      domains: ["hotel", "restaurant"],
      includeDead: true,
    });
    expect(requests).toHaveLength(1);
  });

  it("surfaces server detail on error statuses", async () => {
    const { fetchImpl } = stubFetch({
      "POST /evolve": () => ({ status: 409, body: { detail: "an epoch is already in flight" } }),
    });
    const client = new ApiClient({ fetchImpl });
    await expect(client.triggerEvolution()).rejects.toMatchObject({
      name: "ApiError",
      status: 409,
      detail: "an epoch is already in flight",
    });
  });

  it("treats 204 replies as void", async () => {
    const { fetchImpl } = stubFetch({
      "DELETE /sessions/abc": () => ({ status: 204 }),
    });
    const client = new ApiClient({ fetchImpl });
    await expect(client.deleteSession("abc")).resolves.toBeUndefined();
  });

  it("ends a session via the reserved end token", async () => {
    const { fetchImpl, requests } = stubFetch({
      "POST /sessions/abc/turns": () => ({
        body: { closed: true, outcome: "success", inform: true, success: true,
                turns: 2, recorded: true },
      }),
    });
    const client = new ApiClient({ fetchImpl });
    const closed = await client.endSession("abc");
    expect(closed.outcome).toBe("success");
    expect(requests[0].body).toEqual({ utterance: "/end" });
  });

  it("wraps non-JSON error bodies with the status text", async () => {
    const fetchImpl = async () => new Response("boom", { status: 500, statusText: "Server Error" });
    const client = new ApiClient({ fetchImpl });
    await expect(client.getAnalytics()).rejects.toBeInstanceOf(ApiError);
  });
});
