"""JSON encodings for runtime values, environments and traces.

Scalars map directly (int, bool, string), arrays are lists, and tagged
one-key objects cover the rest:

    {"tuple": [x, y]}                       pair
    {"prin": "a"}  {"prins": ["a","b"]}     principals
    {"sealed": {"ps": ["a"], "v": 5}}       addressed value ("v" omitted or
                                            null means the holder is absent)
    {"map": {"a": 5}}                       per-party map
    {"share": {"ps": ["a","b"], "words": {"a": 3}, "width": 8}}
    {"unit": null}  {"opaque": null}

An input file is one JSON object mapping variable names to values. Traces
serialize as arrays of {"TMsg": v} and {"TScope": {"ps": [...], "t": [...]}}
entries, dumped canonically (sorted keys, no spaces).
"""

from __future__ import annotations

import json
from typing import Any

from .lang import (
    Bool, Clos, Env, FfiInt, FfiList, FfiPair, FfiStr, FixClos, OPAQUE,
    Opaque, PrinSet, PrinVal, PrinsVal, Sealed, ShareVal, TMsg, TScope,
    Trace, UNIT, Unit, Value, VMap, WysError,
)


class InputError(WysError):
    pass


def json_to_value(obj: Any, where: str = "value") -> Value:
    if isinstance(obj, bool):
        return Bool(obj)
    if isinstance(obj, int):
        return FfiInt(obj)
    if isinstance(obj, str):
        return FfiStr(obj)
    if isinstance(obj, list):
        return FfiList(tuple(json_to_value(x, f"{where}[{i}]")
                             for i, x in enumerate(obj)))
    if isinstance(obj, dict):
        if len(obj) != 1:
            raise InputError(f"{where}: tagged objects need exactly one key, "
                             f"got {sorted(obj)}")
        (tag, body), = obj.items()
        if tag == "tuple":
            if not (isinstance(body, list) and len(body) == 2):
                raise InputError(f"{where}: tuple needs a two-element array")
            return FfiPair(json_to_value(body[0], where + ".0"),
                           json_to_value(body[1], where + ".1"))
        if tag == "prin":
            if not isinstance(body, str):
                raise InputError(f"{where}: prin needs a name")
            return PrinVal(body)
        if tag == "prins":
            return PrinsVal(_ps(body, where))
        if tag == "sealed":
            if not isinstance(body, dict) or "ps" not in body:
                raise InputError(f"{where}: sealed needs a ps field")
            ps = _ps(body["ps"], where)
            v = body.get("v")
            # "opaque" is reserved: a party writing someone else's seal marks
            # the missing contents either by omission, null, or that string
            if v is None or v == "opaque":
                inner: Value = OPAQUE
            else:
                inner = json_to_value(v, where + ".v")
            return Sealed(ps, inner)
        if tag == "map":
            if not isinstance(body, dict):
                raise InputError(f"{where}: map needs an object")
            return VMap.of({p: json_to_value(x, f"{where}.{p}")
                            for p, x in body.items()})
        if tag == "share":
            if not isinstance(body, dict):
                raise InputError(f"{where}: share needs an object")
            ps = _ps(body.get("ps"), where)
            words = body.get("words")
            width = body.get("width")
            if not isinstance(words, dict) or not isinstance(width, int):
                raise InputError(f"{where}: share needs words and width")
            for p, w in words.items():
                if p not in ps or not isinstance(w, int):
                    raise InputError(f"{where}: bad share word for {p}")
            return ShareVal.of(ps, {p: w for p, w in words.items()}, width)
        if tag == "unit":
            return UNIT
        if tag == "opaque":
            return OPAQUE
        raise InputError(f"{where}: unknown tag {tag!r}")
    raise InputError(f"{where}: cannot decode {obj!r}")


def _ps(body: Any, where: str) -> PrinSet:
    if not (isinstance(body, list) and body
            and all(isinstance(p, str) for p in body)):
        raise InputError(f"{where}: principal set needs a non-empty "
                         f"array of names")
    return PrinSet.of(*body)


def value_to_json(v: Value) -> Any:
    t = type(v)
    if t is FfiInt:
        return v.n
    if t is Bool:
        return v.b
    if t is FfiStr:
        return v.s
    if t is FfiList:
        return [value_to_json(i) for i in v.items]
    if t is FfiPair:
        return {"tuple": [value_to_json(v.fst), value_to_json(v.snd)]}
    if t is PrinVal:
        return {"prin": v.name}
    if t is PrinsVal:
        return {"prins": list(v.ps.names)}
    if t is Sealed:
        body = {"ps": list(v.ps.names)}
        if type(v.v) is not Opaque:
            body["v"] = value_to_json(v.v)
        return {"sealed": body}
    if t is VMap:
        return {"map": {p: value_to_json(w) for p, w in v.entries}}
    if t is ShareVal:
        return {"share": {"ps": list(v.ps.names),
                          "words": {p: w for p, w in v.words},
                          "width": v.width}}
    if t is Unit:
        return {"unit": None}
    if t is Opaque:
        return {"opaque": None}
    if t is Clos or t is FixClos:
        return {"closure": None}
    raise InputError(f"cannot encode {v!r}")


def trace_to_json(tr: Trace) -> list:
    out = []
    for elt in tr:
        if type(elt) is TMsg:
            out.append({"TMsg": value_to_json(elt.v)})
        else:
            out.append({"TScope": {"ps": list(elt.ps.names),
                                   "t": trace_to_json(elt.t)}})
    return out


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def env_from_json(obj: Any, where: str = "inputs") -> Env:
    if not isinstance(obj, dict):
        raise InputError(f"{where}: expected an object mapping variables "
                         f"to values")
    from .sexp import RESERVED
    for x in obj:
        if not x or x in RESERVED or any(c in '(); \t\r\n"' for c in x):
            raise InputError(f"{where}: {x!r} cannot name an input")
    return Env({x: json_to_value(v, f"{where}.{x}") for x, v in obj.items()})


def load_env_file(path: str) -> Env:
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as ex:
            raise InputError(f"{path}: {ex}") from None
    return env_from_json(obj, path)
