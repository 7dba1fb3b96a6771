/** Pure sorting/filtering model behind the strategy-bank table. */
import { BankRecord } from "./api.js";

export type SortKey =
  | "id"
  | "agent_type"
  | "domains"
  | "fitness"
  | "h_plus"
  | "h_minus"
  | "n_used"
  | "generation";

export interface SortSpec {
  key: SortKey;
  direction: "asc" | "desc";
}

export interface BankFilter {
  agentType?: "DST" | "DP" | "NLG";
  domain?: string;
  search?: string;
  includeDead?: boolean;
}

function comparable(record: BankRecord, key: SortKey): string | number {
  if (key === "domains") return record.domains.join("+");
  const value = record[key];
  // dead strategies have no live fitness; sort them last regardless of direction
  if (value === null) return Number.NEGATIVE_INFINITY;
  return value as string | number;
}

export function sortRecords(records: BankRecord[], spec: SortSpec): BankRecord[] {
  const sign = spec.direction === "asc" ? 1 : -1;
  return [...records].sort((a, b) => {
    const av = comparable(a, spec.key);
    const bv = comparable(b, spec.key);
    if (av < bv) return -sign;
    if (av > bv) return sign;
    return a.id < b.id ? -1 : a.id > b.id ? 1 : 0;
  });
}

export function filterRecords(records: BankRecord[], filter: BankFilter): BankRecord[] {
  const needle = filter.search?.trim().toLowerCase();
  return records.filter((r) => {
    if (!filter.includeDead && !r.alive) return false;
    if (filter.agentType && r.agent_type !== filter.agentType) return false;
    if (filter.domain && !r.domains.includes(filter.domain)) return false;
    if (needle && !`${r.id} ${r.content} ${r.reason}`.toLowerCase().includes(needle)) {
      return false;
    }
    return true;
  });
}

/** Flip direction when re-sorting the same column; numeric columns start
 * descending (biggest first), text columns ascending. */
export function nextSort(current: SortSpec | undefined, key: SortKey): SortSpec {
  if (current && current.key === key) {
    return { key, direction: current.direction === "asc" ? "desc" : "asc" };
  }
  const textual = key === "id" || key === "agent_type" || key === "domains";
  return { key, direction: textual ? "asc" : "desc" };
}

export function domainOptions(records: BankRecord[]): string[] {
  const all = new Set<string>();
  for (const r of records) for (const d of r.domains) all.add(d);
  return [...all].sort();
}
