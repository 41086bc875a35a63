"""User-defined operators.

A user-defined operator subclasses :class:`Operator`, declares the modality it
runs on and the predicate keys it accepts, and implements ``output_schema``
and ``execute``. ``absorb`` is optional: it lets the optimizer push filter
conjuncts into the operator. :class:`PathQuery` is the shipped example.
"""

from __future__ import annotations

import copy
from typing import Any, Dict, Iterable, List, Mapping, Optional, Tuple

from . import predicates
from .graph import DIRECTIONS, ID, LABEL, PATH, PropertyGraph, Step, path_query, path_schema
from .model import Modality, RecordSet


class Operator:
    """Base class for user-defined operators."""

    name: str = ""
    modality: Modality = Modality.TABLE
    pred_keys: Tuple[str, ...] = ()

    def validate_pred(self, pred: Mapping[str, Any]) -> List[str]:
        return []

    def output_schema(self, backend, pred: Mapping[str, Any]) -> Tuple[str, ...]:
        raise NotImplementedError

    def estimate(self, cardinality: float, pred: Mapping[str, Any], selectivity) -> float:
        return float(cardinality)

    def absorb(self, backend, pred: Mapping[str, Any], conjunct: dict) -> Optional[Dict[str, Any]]:
        """Return a predicate with ``conjunct`` pushed inside, or None."""
        return None

    def execute(self, backend, pred: Mapping[str, Any], start: Optional[RecordSet]) -> RecordSet:
        raise NotImplementedError


class PathQuery(Operator):
    """Fixed-length graph pattern, e.g. Team <-DRAFTED_BY- Player -ATTENDED-> College.

    ``steps`` is a list of ``{label, filter, carry}`` for the start node
    followed by ``{edge, direction, label, filter, edge_filter, carry}`` per hop.
    ``carry`` maps a node property to an output attribute name.
    """

    name = "PathQuery"
    modality = Modality.GRAPH
    pred_keys = ("steps",)
    step_keys = {"label", "edge", "direction", "filter", "edge_filter", "carry"}

    def validate_pred(self, pred):
        steps = pred.get("steps")
        if not isinstance(steps, list) or not steps:
            return ["'steps' must be a non-empty list"]
        problems = []
        outputs = set()
        for i, step in enumerate(steps):
            if not isinstance(step, dict):
                problems.append(f"step {i} must be an object")
                continue
            extra = set(step) - self.step_keys
            if extra:
                problems.append(f"step {i}: unknown keys {sorted(extra)}")
            if i == 0 and "edge" in step:
                problems.append("the first step names the start label and takes no edge")
            if i > 0 and not isinstance(step.get("edge"), str):
                problems.append(f"step {i}: 'edge' must name an edge type")
            if step.get("direction", "out") not in DIRECTIONS:
                problems.append(f"step {i}: direction must be one of {list(DIRECTIONS)}")
            if "label" in step and not isinstance(step["label"], str):
                problems.append(f"step {i}: 'label' must be text")
            for key in ("filter", "edge_filter"):
                try:
                    predicates.normalize(step.get(key))
                except predicates.FilterSyntaxError as exc:
                    problems.append(f"step {i}: malformed {key}: {exc}")
            carry = step.get("carry", {})
            if not isinstance(carry, dict) or not all(isinstance(v, str) and v for v in carry.values()):
                problems.append(f"step {i}: 'carry' must map properties to attribute names")
            else:
                for out in carry.values():
                    if out in outputs or out in (ID, LABEL, PATH):
                        problems.append(f"step {i}: carried attribute {out!r} is already used")
                    outputs.add(out)
        return problems

    def _steps(self, pred) -> List[Step]:
        return [Step.from_dict(s) for s in pred["steps"]]

    def output_schema(self, backend: PropertyGraph, pred):
        return path_schema(backend, self._steps(pred))

    def estimate(self, cardinality, pred, selectivity):
        est = float(cardinality)
        for s in pred["steps"]:
            est *= selectivity(predicates.normalize(s.get("filter"), allow_internal=True))
        return est

    def absorb(self, backend: PropertyGraph, pred, conjunct):
        steps = pred["steps"]
        names = predicates.refs(conjunct)
        last = len(steps) - 1
        final_attrs = set(backend.node_schema(steps[last].get("label")))
        target: Optional[int] = None
        mapping: Dict[str, str] = {}
        if PATH in names:
            return None
        if names <= final_attrs:
            target = last
        else:
            for i, step in enumerate(steps):
                carry = step.get("carry") or {}
                inverse = {out: prop for prop, out in carry.items()}
                known = set(backend.node_schema(step.get("label")))
                if names <= set(inverse) and all(inverse[n] in known for n in names):
                    target, mapping = i, inverse
                    break
        if target is None:
            return None
        new = copy.deepcopy(dict(pred))
        step = new["steps"][target]
        existing = predicates.normalize(step.get("filter"), allow_internal=True)
        step["filter"] = predicates.conjoin([existing, predicates.rename(conjunct, mapping)])
        return new

    def execute(self, backend: PropertyGraph, pred, start):
        return path_query(backend, self._steps(pred), start)


class OperatorRegistry:
    def __init__(self, operators: Iterable[Operator] = ()):
        self._ops: Dict[str, Operator] = {}
        for op in operators:
            self.register(op)

    def register(self, op: Operator) -> Operator:
        if not op.name:
            raise ValueError("operator needs a name")
        self._ops[op.name] = op
        return op

    def get(self, name: str) -> Operator:
        return self._ops[name]

    def __contains__(self, name: str) -> bool:
        return name in self._ops

    def names(self) -> List[str]:
        return sorted(self._ops)


_DEFAULT = OperatorRegistry([PathQuery()])


def default_registry() -> OperatorRegistry:
    return _DEFAULT
