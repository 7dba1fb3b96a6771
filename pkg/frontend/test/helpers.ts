import { BankRecord, FetchLike } from "../src/api.js";

export interface RecordedRequest {
  url: string;
  method: string;
  headers: Record<string, string>;
  body?: unknown;
}

/** Route table keyed by "METHOD path" (query string included). */
export function stubFetch(
  routes: Record<string, (req: RecordedRequest) => { status?: number; body?: unknown }>,
): { fetchImpl: FetchLike; requests: RecordedRequest[] } {
  const requests: RecordedRequest[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    const req: RecordedRequest = {
      url,
      method: init?.method ?? "GET",
      headers: (init?.headers as Record<string, string>) ?? {},
      body: init?.body ? JSON.parse(init.body as string) : undefined,
    };
    requests.push(req);
    const handler = routes[`${req.method} ${url}`];
    if (!handler) {
      return new Response(JSON.stringify({ detail: `no route: ${req.method} ${url}` }), {
        status: 404,
        headers: { "Content-Type": "application/json" },
      });
    }
    const { status = 200, body = {} } = handler(req);
    if (status === 204) return new Response(null, { status });
    return new Response(JSON.stringify(body), {
      status,
      headers: { "Content-Type": "application/json" },
    });
  };
  return { fetchImpl, requests };
}

export function record(overrides: Partial<BankRecord> = {}): BankRecord {
  return {
    id: "s000001",
    agent_type: "DST",
    domains: ["hotel"],
    content: "track all slots",
    reason: "",
    h_plus: 0,
    h_minus: 0,
    n_used: 0,
    generation: 1,
    alive: true,
    fitness: 0,
    ...overrides,
  };
}
