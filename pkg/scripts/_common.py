import argparse
from dataclasses import fields
from pathlib import Path


def parse_config(cls, description: str):
    """Build an argparse parser from a dataclass and return an instance."""
    ap = argparse.ArgumentParser(description=description)
    for f in fields(cls):
        ap.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    return cls(**vars(ap.parse_args()))


def write(text: str, path: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text)
    print(f"wrote {path}")
