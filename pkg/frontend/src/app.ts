/** Browser entry point: wires the chat panel, bank table, analytics strip,
 * and evolution control to the DOM. Pure logic lives in the sibling modules
 * so it stays testable without a browser. */
import { Analytics, ApiClient, BankRecord, UserGoal } from "./api.js";
import { BankFilter, SortSpec, domainOptions, filterRecords, nextSort, sortRecords } from "./bankTable.js";
import { ChatSession, ChatState } from "./chat.js";
import { Poller } from "./poller.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(value: number | null | undefined, digits = 3): string {
  return value === null || value === undefined ? "–" : value.toFixed(digits);
}

export function startApp(baseUrl = ""): void {
  const client = new ApiClient({ baseUrl });

  // ---- chat panel --------------------------------------------------------
  const chatLog = el<HTMLDivElement>("chat-log");
  const chatMeta = el<HTMLDivElement>("chat-meta");
  const chatInput = el<HTMLInputElement>("chat-input");
  const goalInput = el<HTMLTextAreaElement>("goal-input");

  const renderChat = (state: ChatState): void => {
    chatMeta.textContent =
      state.status === "open" || state.status === "busy"
        ? `session ${state.sessionId ?? ""} · domains: ${state.domains.join(", ")} · ` +
          Object.entries(state.strategies).map(([a, s]) => `${a}=${s}`).join(" ")
        : state.status === "closed" && state.result
          ? `closed · outcome: ${state.result.outcome} · turns: ${state.result.turns}`
          : state.error ?? "no session";
    chatLog.replaceChildren(
      ...state.turns.flatMap((turn) => {
        const user = document.createElement("div");
        user.className = "msg user";
        user.textContent = turn.user;
        const system = document.createElement("div");
        system.className = "msg system";
        system.textContent = turn.response;
        const diag = document.createElement("div");
        diag.className = "diag";
        const critiques = turn.diagnostics.critiques
          .map((c) => `${c.author}→${c.target}: ${c.text}`)
          .join(" | ");
        diag.textContent =
          `action: ${turn.diagnostics.systemAction}` +
          ` · belief: ${JSON.stringify(turn.diagnostics.beliefState)}` +
          (turn.diagnostics.dbResultCount !== undefined
            ? ` · db hits: ${turn.diagnostics.dbResultCount}`
            : "") +
          (critiques ? ` · critiques: ${critiques}` : "");
        return [user, system, diag];
      }),
    );
    chatLog.scrollTop = chatLog.scrollHeight;
  };

  const chat = new ChatSession(client, renderChat);

  el<HTMLButtonElement>("chat-open").addEventListener("click", () => {
    const goal = JSON.parse(goalInput.value) as UserGoal;
    void chat.open(goal).catch(() => {});
  });
  el<HTMLButtonElement>("chat-end").addEventListener("click", () => {
    void chat.end();
  });
  el<HTMLButtonElement>("chat-discard").addEventListener("click", () => {
    void chat.discard();
  });
  el<HTMLFormElement>("chat-form").addEventListener("submit", (event) => {
    event.preventDefault();
    const text = chatInput.value.trim();
    if (!text) return;
    chatInput.value = "";
    void chat.send(text).catch(() => {});
  });

  // ---- bank table --------------------------------------------------------
  let records: BankRecord[] = [];
  let sort: SortSpec = { key: "fitness", direction: "desc" };
  const filter: BankFilter = {};
  const bankBody = el<HTMLTableSectionElement>("bank-body");
  const domainSelect = el<HTMLSelectElement>("bank-domain");

  const renderBank = (): void => {
    const rows = sortRecords(filterRecords(records, filter), sort);
    bankBody.replaceChildren(
      ...rows.map((r) => {
        const tr = document.createElement("tr");
        if (!r.alive) tr.className = "dead";
        for (const cell of [
          r.id, r.agent_type, r.domains.join("+"), fmt(r.fitness),
          String(r.h_plus), String(r.h_minus), String(r.n_used),
          String(r.generation), r.content,
        ]) {
          const td = document.createElement("td");
          td.textContent = cell;
          tr.appendChild(td);
        }
        return tr;
      }),
    );
  };

  const refreshBank = async (): Promise<void> => {
    records = await client.getBank({ includeDead: true });
    const current = domainSelect.value;
    domainSelect.replaceChildren(
      new Option("all domains", ""),
      ...domainOptions(records).map((d) => new Option(d, d)),
    );
    domainSelect.value = current;
    renderBank();
  };

  for (const th of document.querySelectorAll<HTMLTableCellElement>("th[data-sort]")) {
    th.addEventListener("click", () => {
      sort = nextSort(sort, th.dataset.sort as SortSpec["key"]);
      renderBank();
    });
  }
  el<HTMLSelectElement>("bank-agent").addEventListener("change", (e) => {
    const value = (e.target as HTMLSelectElement).value;
    filter.agentType = (value || undefined) as BankFilter["agentType"];
    renderBank();
  });
  domainSelect.addEventListener("change", () => {
    filter.domain = domainSelect.value || undefined;
    renderBank();
  });
  el<HTMLInputElement>("bank-search").addEventListener("input", (e) => {
    filter.search = (e.target as HTMLInputElement).value;
    renderBank();
  });
  el<HTMLInputElement>("bank-dead").addEventListener("change", (e) => {
    filter.includeDead = (e.target as HTMLInputElement).checked;
    renderBank();
  });
  el<HTMLButtonElement>("bank-refresh").addEventListener("click", () => {
    void refreshBank();
  });

  // ---- analytics strip ---------------------------------------------------
  const analyticsBox = el<HTMLDivElement>("analytics");
  const staleBadge = el<HTMLSpanElement>("stale-badge");

  const poller = new Poller<Analytics>({
    fetchValue: () => client.getAnalytics(),
    onValue: (a) => {
      analyticsBox.textContent =
        `entropy: ${fmt(a.entropy_bits)} bits · mean fitness: ${fmt(a.mean_alive_fitness)}` +
        ` · similarity: ${fmt(a.mean_pairwise_similarity)}` +
        ` · alive: ${a.counts.alive_strategies}/${a.counts.total_strategies}` +
        ` · dialogs: ${a.counts.trajectories} · epochs: ${a.counts.epochs}`;
      staleBadge.hidden = true;
    },
    onError: () => {
      staleBadge.hidden = !poller.isStale() && poller.staleness() !== undefined;
      staleBadge.textContent = `stale (retrying in ${Math.round(poller.currentIntervalMs() / 1000)}s)`;
    },
  });
  poller.start();

  // ---- evolution control -------------------------------------------------
  const evolveButton = el<HTMLButtonElement>("evolve");
  const evolveStatus = el<HTMLDivElement>("evolve-status");
  evolveButton.addEventListener("click", () => {
    evolveButton.disabled = true;
    client
      .triggerEvolution()
      .then((report) => {
        evolveStatus.textContent =
          `epoch ${report.epoch_index}: ${report.operations.length} operations, ` +
          `population ${report.population_before} → ${report.population_after}`;
        return refreshBank();
      })
      .catch((err: unknown) => {
        evolveStatus.textContent = err instanceof Error ? err.message : String(err);
      })
      .finally(() => {
        evolveButton.disabled = false;
      });
  });

  void refreshBank();
}
