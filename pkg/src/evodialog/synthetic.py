"""Deterministic scripted provider playing every agent and operator role.

Backs the closed-loop smoke runs, the ablation harness, and the CLI mock
mode: replies are consistent with the entity database and the synthetic
corpus utterance patterns, so whole runs complete with zero human input
and are byte-reproducible under a fixed seed. An optional sabotage rate
injects wrong-entity recommendations (and matching negative critiques) to
exercise the mutation path.
"""
from __future__ import annotations

import json
import re
import zlib

from .corpus import Database

_LOOKING_RE = re.compile(r"looking for a (\w+) with (.+)")
_ASKING_RE = re.compile(r"what is the (\w+) of that (\w+)")
_REV_RE = re.compile(r"\s*\[rev (\d+)\]$")

_ASPECTS = [
    "confirming constraints early", "minimizing turns", "offering alternatives",
    "verifying slot values", "summarizing progress", "asking one question at a time",
    "grounding answers in database results", "restating the user goal",
    "avoiding redundant questions", "closing politely",
]


class SyntheticAgentProvider:
    """Implements the provider protocol: complete(template_id, variables, prompt)."""

    def __init__(self, db: Database, seed: int = 0, sabotage_rate: float = 0.0,
                 arbiter_accepts: bool = False):
        self.db = db
        self.seed = seed
        self.sabotage_rate = sabotage_rate
        self.arbiter_accepts = arbiter_accepts

    # -- helpers ----------------------------------------------------------

    def _sabotage(self, key: str) -> bool:
        if self.sabotage_rate <= 0.0:
            return False
        digest = zlib.crc32(f"{self.seed}:{key}".encode("utf-8"))
        return (digest % 10_000) / 10_000 < self.sabotage_rate

    @staticmethod
    def _parse_constraints(rest: str) -> dict[str, str]:
        out = {}
        for part in rest.split(" and "):
            tokens = part.strip().split(None, 1)
            if len(tokens) == 2:
                out[tokens[0]] = tokens[1]
        return out

    def _track(self, variables: dict) -> dict:
        belief = json.loads(variables["previous_belief_state"] or "{}")
        m = _LOOKING_RE.search(variables["user_utterance"])
        if m:
            domain, rest = m.group(1), m.group(2)
            belief = dict(belief)
            belief[domain] = {**belief.get(domain, {}), **self._parse_constraints(rest)}
        return belief

    def _policy(self, utterance: str, belief: dict) -> dict:
        asking = _ASKING_RE.search(utterance)
        looking = _LOOKING_RE.search(utterance)
        if asking:
            slot, domain = asking.group(1), asking.group(2)
            constraints = belief.get(domain, {})
            return {
                "critique": "",
                "system_action": f"inform({slot}=pending)",
                "reason": "user requested a slot value",
                "query_db": True,
                "query": {"domain": domain, "state": {domain: constraints}},
            }
        if looking:
            domain = looking.group(1)
            constraints = belief.get(domain, {})
            if self._sabotage(f"dp:{domain}:{json.dumps(constraints, sort_keys=True)}"):
                constraints = {}
            return {
                "critique": "",
                "system_action": "recommend(entity)",
                "reason": "constraints gathered, offering an entity",
                "query_db": True,
                "query": {"domain": domain, "state": {domain: constraints}},
            }
        return {
            "critique": "",
            "system_action": "nooffer()",
            "reason": "closing the dialog",
            "query_db": False,
            "query": {},
        }

    def _realize(self, action: str, results: list[dict]) -> str:
        if action.startswith("recommend"):
            if results:
                e = results[-1] if self._sabotage(f"nlg:{results[0].get('name')}") else results[0]
                extra = e.get("area") or e.get("type") or ""
                return f"i recommend {e['name']} , in the {extra} ."
            return "sorry , i could not find anything matching your request ."
        m = re.match(r"inform\((\w+)=", action)
        if m and results:
            slot = m.group(1)
            return f"the {slot} is {results[0].get(slot, 'unknown')} ."
        if m:
            return "sorry , i have no result to report that from ."
        return "you are welcome , goodbye ."

    # -- provider protocol -------------------------------------------------

    def complete(self, template_id: str, variables: dict, prompt: str) -> str:
        handler = getattr(self, f"_reply_{template_id}", None)
        if handler is None:
            raise NotImplementedError(f"no synthetic behavior for '{template_id}'")
        return json.dumps(handler(variables))

    def _reply_dst(self, variables: dict) -> dict:
        return {
            "critique": "",
            "belief_state": self._track(variables),
            "reason": "tracked the constraints stated by the user",
        }

    def _reply_dp(self, variables: dict) -> dict:
        belief = json.loads(variables["belief_state"] or "{}")
        return self._policy(variables["user_utterance"], belief)

    def _reply_nlg(self, variables: dict) -> dict:
        results = json.loads(variables["db_results"] or "[]")
        response = self._realize(variables["system_action"], results)
        critique = "the action could not be grounded in any result" if "sorry" in response else ""
        return {"critique": critique, "response": response,
                "reason": "realized the system action"}

    def _reply_user_sim(self, variables: dict) -> dict:
        response = variables["system_response"]
        if "sorry" in response:
            return {"critique": "the system failed to offer a matching entity",
                    "reason": "goal cannot progress"}
        return {"critique": "", "reason": "response serves the goal"}

    def _reply_e2e_stage1(self, variables: dict) -> dict:
        belief = self._track(variables)
        policy = self._policy(variables["user_utterance"], belief)
        return {
            "critique": "",
            "belief_state": belief,
            "system_action": policy["system_action"],
            "reason": policy["reason"],
            "query_db": policy["query_db"],
            "query": policy["query"],
        }

    def _reply_e2e_stage2(self, variables: dict) -> dict:
        results = json.loads(variables["db_results"] or "[]")
        return {"response": self._realize(variables["system_action"], results),
                "reason": "realized the system action"}

    def _reply_arbiter(self, variables: dict) -> dict:
        return {
            "critique_accepted": self.arbiter_accepts,
            "final_output": variables["original_output"],
            "reason": "arbitration verdict",
        }

    def _reply_genesis(self, variables: dict) -> dict:
        k = int(variables["k"])
        domain = variables["domain"]
        role = variables["agent_role"]
        return {"strategies": [
            {
                "content": f"For {domain} {role}, variant {i}: emphasize "
                           f"{_ASPECTS[i % len(_ASPECTS)]}.",
                "reason": f"covers {_ASPECTS[i % len(_ASPECTS)]} in the {domain} domain",
            }
            for i in range(k)
        ]}

    def _reply_mutation(self, variables: dict) -> dict:
        traj = json.loads(variables["trajectory"])
        score = -1 if traj.get("outcome") == "failure" else 0
        content = variables["strategy_content"]
        m = _REV_RE.search(content)
        if m:
            base, rev = content[: m.start()], int(m.group(1)) + 1
        else:
            base, rev = content, 1
        return {
            "score": score,
            "content": f"{base} [rev {rev}]",
            "reason": "revised to address the observed failure",
        }

    def _reply_consolidation(self, variables: dict) -> dict:
        contents = json.loads(variables["strategy_contents"])
        bases = [_REV_RE.sub("", c) for c in contents]
        return {
            "content": "Unified: " + " / ".join(sorted(set(bases))),
            "reason": "merged overlapping strategies without losing intent",
        }
