"""Prompt templates and structured-reply schemas for every agent and operator.

Each template declares its placeholders; rendering is byte-exact substitution
and an unbound placeholder is an error. Each template pairs with a JSON
schema requiring exactly the fields of its output-format block.
"""
from __future__ import annotations

from dataclasses import dataclass

from jsonschema import Draft202012Validator

from .errors import TemplateError

DST_TEMPLATE = """\
## Dialog STATE TRACKER
- Domains: {domains}
- User Utterance: {user_utterance}

{previous_belief_state}

{formatted_history}

{formatted_esb}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the User Output (if any)",
  "belief_state": {"domain1": {"slot1": "value1", "slot2": "value2"}, "domain2": {...}},
  "reason": "Explanation of belief state changes"
}
"""

DP_TEMPLATE = """\
## Dialog POLICY AGENT
- Domains: {domains}
- Lasted User Utterance: {user_utterance}
- Current Belief State: {belief_state}
- Previous Belief State:{pre_belief_state}

{formatted_history}

{formatted_esb}

## SYSTEM ACTION TYPES:
- inform(slot=value): Provide information to the user about a specific slot
- request(slot): Request more information from the user for a specific slot
- recommend(entity): Recommend a specific entity to the user
- select(entity): Select an entity from the database results
- nooffer(): Inform user that no matching results were found
- book(slot1=value1,slot2=value2): Make a booking with specified parameters
- nobook(): Inform user that booking cannot be completed
- offerbook(slot1=value1,slot2=value2): Offer booking options with specified parameters
- offerbooked(booking_details): Confirm successful booking with details

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the Belief State Changes (if any)",
  "system_action": "appropriate action based on the current context",
  "reason": "Your reason for the DP output",
  "query_db": true/false,
  "query": {
    "domain": "the name of domain to query",
    "state": {"the name of domain to query": {"slot_name1": "value1", "slot_name2": "value2"} }
  }
}
"""

NLG_TEMPLATE = """\
## NATURAL LANGUAGE GENERATOR
- Domains: {domains}
- System Action: {system_action}
- Database Results: {db_results}

{formatted_history}

{formatted_esb}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the System Action (if any)",
  "response": "The natural language response to the user",
  "reason": "Your reason for the NLG output"
}
"""

USER_SIM_TEMPLATE = """\
## USER SIMULATOR
- Domains: {domains}
- User Goal: {goal}
- System Response: {system_response}

{formatted_history}

Assess whether the system response serves the user goal. Leave critique as empty string if the response is good.

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the System Response (if any)",
  "reason": "Your reason for the assessment"
}
"""

E2E_STAGE1_TEMPLATE = """\
## END-TO-END DIALOG AGENT (STAGE 1: STATE AND ACTION)
- Domains: {domains}
- User Utterance: {user_utterance}
- Previous Belief State: {previous_belief_state}

{formatted_history}

{formatted_esb}

Update the belief state and choose the system action in one pass.

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique": "Your critique of the dialog so far (if any)",
  "belief_state": {"domain1": {"slot1": "value1"}},
  "system_action": "appropriate action based on the current context",
  "reason": "Your reason for the output",
  "query_db": true/false,
  "query": {
    "domain": "the name of domain to query",
    "state": {"the name of domain to query": {"slot_name1": "value1"} }
  }
}
"""

E2E_STAGE2_TEMPLATE = """\
## END-TO-END DIALOG AGENT (STAGE 2: RESPONSE)
- Domains: {domains}
- System Action: {system_action}
- Database Results: {db_results}

{formatted_history}

{formatted_esb}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "response": "The natural language response to the user",
  "reason": "Your reason for the response"
}
"""

ARBITER_TEMPLATE = """\
## ARBITER
An agent's output was critiqued by a peer. Decide whether the critique is valid and, if so, produce the corrected output.
- Author of output: {target_agent}
- Critiquing agent: {author_agent}
- Original Output: {original_output}
- Critique: {critique}
- Context: {context}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "critique_accepted": true/false,
  "final_output": "the output to adopt (corrected if the critique is accepted, otherwise the original)",
  "reason": "Your reason for the arbitration"
}
"""

GENESIS_TEMPLATE = """\
## STRATEGY GENESIS
Synthesize {k} distinct dialog strategies for the {agent_role} agent in the "{domain}" domain, based solely on the domain name and the agent role. Each strategy is a concise natural-language policy description with a rationale.

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "strategies": [
    {"content": "strategy description", "reason": "why this strategy should help"}
  ]
}
"""

MUTATION_TEMPLATE = """\
## STRATEGY MUTATION
A strategy was involved in a failed dialog or received negative critiques. First assess whether the strategy was helpful (1), neutral (0), or harmful (-1) in this context, then generate a revised strategy that addresses the identified shortcomings.
- Strategy: {strategy_content}
- Strategy Rationale: {strategy_rationale}
- Failed Trajectory: {trajectory}
- Critiques: {critiques}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "score": -1 | 0 | 1,
  "content": "the revised strategy description",
  "reason": "why the revision addresses the shortcomings"
}
"""

CONSOLIDATION_TEMPLATE = """\
## STRATEGY CONSOLIDATION
Merge the following highly similar strategies into one strategy that preserves their combined intent without redundancy.
- Strategies: {strategy_contents}

## Output Format:
Output ONLY the JSON object. Do not include any additional text, explanations, or markdown formatting outside the JSON.
{
  "content": "the merged strategy description",
  "reason": "why the merge preserves the combined intent"
}
"""

# Static per-agent strategies for the zero-shot mode (no selection, no evolution).
STATIC_STRATEGIES = {
    "DST": (
        "Track every slot the user states or changes. Carry forward all previously "
        "confirmed slots, record 'dontcare' when the user has no preference, and "
        "never invent domains or slots the user did not mention."
    ),
    "DP": (
        "If required constraints are missing, request them one at a time. Once "
        "constraints suffice, query the database; recommend a matching entity, "
        "answer requested slots with inform acts, and offer booking when asked. "
        "Use nooffer when nothing matches."
    ),
    "NLG": (
        "Realize every act in the system action as one short, polite sentence "
        "each, mentioning entity names and slot values exactly as given, and end "
        "with a question when information was requested."
    ),
}


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str
    placeholders: tuple[str, ...]
    schema: dict


def _schema(required: dict[str, dict]) -> dict:
    return {
        "type": "object",
        "properties": required,
        "required": list(required),
    }


_STR = {"type": "string"}
_BOOL = {"type": "boolean"}
_BELIEF = {"type": "object", "additionalProperties": {"type": "object"}}
_QUERY = {"type": "object"}

TEMPLATES: dict[str, PromptTemplate] = {}


def _register(template_id: str, body: str, placeholders: tuple[str, ...], schema: dict) -> None:
    Draft202012Validator.check_schema(schema)
    TEMPLATES[template_id] = PromptTemplate(template_id, body, placeholders, schema)


_register("dst", DST_TEMPLATE,
          ("domains", "user_utterance", "previous_belief_state", "formatted_history", "formatted_esb"),
          _schema({"critique": _STR, "belief_state": _BELIEF, "reason": _STR}))
_register("dp", DP_TEMPLATE,
          ("domains", "user_utterance", "belief_state", "pre_belief_state", "formatted_history", "formatted_esb"),
          _schema({"critique": _STR, "system_action": _STR, "reason": _STR,
                   "query_db": _BOOL, "query": _QUERY}))
_register("nlg", NLG_TEMPLATE,
          ("domains", "system_action", "db_results", "formatted_history", "formatted_esb"),
          _schema({"critique": _STR, "response": _STR, "reason": _STR}))
_register("user_sim", USER_SIM_TEMPLATE,
          ("domains", "goal", "system_response", "formatted_history"),
          _schema({"critique": _STR, "reason": _STR}))
_register("e2e_stage1", E2E_STAGE1_TEMPLATE,
          ("domains", "user_utterance", "previous_belief_state", "formatted_history", "formatted_esb"),
          _schema({"critique": _STR, "belief_state": _BELIEF, "system_action": _STR,
                   "reason": _STR, "query_db": _BOOL, "query": _QUERY}))
_register("e2e_stage2", E2E_STAGE2_TEMPLATE,
          ("domains", "system_action", "db_results", "formatted_history", "formatted_esb"),
          _schema({"response": _STR, "reason": _STR}))
_register("arbiter", ARBITER_TEMPLATE,
          ("target_agent", "author_agent", "original_output", "critique", "context"),
          _schema({"critique_accepted": _BOOL, "final_output": _STR, "reason": _STR}))
_register("genesis", GENESIS_TEMPLATE,
          ("k", "agent_role", "domain"),
          _schema({"strategies": {
              "type": "array",
              "minItems": 1,
              "items": _schema({"content": _STR, "reason": _STR}),
          }}))
_register("mutation", MUTATION_TEMPLATE,
          ("strategy_content", "strategy_rationale", "trajectory", "critiques"),
          _schema({"score": {"enum": [-1, 0, 1]}, "content": _STR, "reason": _STR}))
_register("consolidation", CONSOLIDATION_TEMPLATE,
          ("strategy_contents",),
          _schema({"content": _STR, "reason": _STR}))


def render_prompt(template_id: str, variables: dict[str, str]) -> str:
    """Substitute every declared placeholder; missing bindings raise TemplateError."""
    template = TEMPLATES[template_id]
    text = template.body
    for name in template.placeholders:
        if name not in variables:
            raise TemplateError(name)
        text = text.replace("{" + name + "}", str(variables[name]))
    return text


def validate_reply(template_id: str, reply: object) -> list[str]:
    """Return the list of schema violation messages (empty if valid)."""
    validator = Draft202012Validator(TEMPLATES[template_id].schema)
    return [e.message for e in validator.iter_errors(reply)]
