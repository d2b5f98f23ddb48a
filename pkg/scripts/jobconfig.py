"""Turn a dataclass of job settings into command-line flags."""

import argparse
import dataclasses
import json


def parse_job(cls, description: str, argv=None):
    ap = argparse.ArgumentParser(description=description)
    for f in dataclasses.fields(cls):
        kind = f.type if isinstance(f.type, type) else {"int": int, "float": float, "str": str,
                                                         "bool": bool}.get(str(f.type), str)
        flag = "--" + f.name.replace("_", "-")
        if kind is bool:
            ap.add_argument(flag, action=argparse.BooleanOptionalAction, default=f.default)
        else:
            ap.add_argument(flag, type=kind, default=f.default)
    ap.add_argument("--config", help="JSON file with field overrides")
    ns = vars(ap.parse_args(argv))
    path = ns.pop("config")
    if path:
        with open(path) as fh:
            ns.update(json.load(fh))
    return cls(**ns)


def floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v]
