#!/usr/bin/env python3
"""Build a small mixed-domain corpus in the Pile JSONL shape.

Each output line is {"text": ..., "meta": {"subset": ...}}. Sources are text
files that ship with a stock Debian/Ubuntu + CPython install, so the corpus can
be rebuilt offline. Sampling is seeded; rerunning on the same machine image
reproduces the file byte for byte.

usage: build_corpus.py OUT.jsonl [N_DOCS] [SEED]
"""

import ast
import glob
import gzip
import json
import os
import random
import re
import sys

MIN_CHARS = 200
MAX_CHARS = 1400


def clip(text):
    text = text.strip()
    if len(text) <= MAX_CHARS:
        return text
    cut = text.rfind(" ", 0, MAX_CHARS)
    return text[: cut if cut > MIN_CHARS else MAX_CHARS]


def paragraphs(text, join=2):
    paras = [p.strip() for p in re.split(r"\n\s*\n", text) if p.strip()]
    out = []
    for i in range(0, len(paras), join):
        chunk = "\n\n".join(paras[i : i + join])
        if len(chunk) >= MIN_CHARS:
            out.append(clip(chunk))
    return out


def licenses():
    docs = []
    files = sorted(glob.glob("/usr/share/common-licenses/*"))
    files += sorted(glob.glob("/usr/share/doc/*/copyright"))
    for path in files:
        if os.path.isdir(path):
            continue
        try:
            text = open(path, encoding="utf-8").read()
        except (UnicodeDecodeError, OSError):
            continue
        docs.extend(paragraphs(text, join=3))
    return docs


def changelogs():
    docs = []
    for path in sorted(glob.glob("/usr/share/doc/*/changelog*.gz")):
        try:
            text = gzip.open(path, "rt", encoding="utf-8").read()
        except (UnicodeDecodeError, OSError, EOFError):
            continue
        entries = re.split(r"\n(?=\S[^\n]*\(\S+\) )", text)
        for entry in entries[:6]:
            if len(entry) >= MIN_CHARS:
                docs.append(clip(entry))
    return docs


def python_sources():
    files = sorted(glob.glob("/usr/lib/python3.10/*.py"))
    files += sorted(glob.glob("/usr/lib/python3.10/*/*.py"))
    return [f for f in files if "/test" not in f and "idlelib" not in f]


def docstrings(files):
    docs = []
    for path in files:
        try:
            tree = ast.parse(open(path, encoding="utf-8").read())
        except (SyntaxError, UnicodeDecodeError, OSError):
            continue
        for node in ast.walk(tree):
            if isinstance(node, (ast.Module, ast.ClassDef, ast.FunctionDef)):
                doc = ast.get_docstring(node)
                if doc and len(doc) >= MIN_CHARS:
                    docs.append(clip(doc))
    return docs


def code(files):
    docs = []
    for path in files:
        try:
            src = open(path, encoding="utf-8").read()
            tree = ast.parse(src)
        except (SyntaxError, UnicodeDecodeError, OSError):
            continue
        lines = src.splitlines()
        for node in tree.body:
            if isinstance(node, (ast.FunctionDef, ast.ClassDef)) and node.end_lineno:
                body = "\n".join(lines[node.lineno - 1 : node.end_lineno])
                if len(body) >= MIN_CHARS:
                    docs.append(clip(body))
    return docs


def markup_docs():
    docs = []
    files = sorted(glob.glob("/usr/**/*.rst", recursive=True))
    files += sorted(glob.glob("/usr/**/*.md", recursive=True))
    for path in files:
        try:
            text = open(path, encoding="utf-8").read()
        except (UnicodeDecodeError, OSError):
            continue
        docs.extend(paragraphs(text, join=3))
    return docs


def main():
    out = sys.argv[1]
    n_docs = int(sys.argv[2]) if len(sys.argv) > 2 else 2000
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 1234
    rng = random.Random(seed)

    sources = python_sources()
    pools = {
        "Licenses": licenses(),
        "Changelogs": changelogs(),
        "Docstrings": docstrings(sources),
        "Github": code(sources),
        "Documentation": markup_docs(),
    }
    per_subset = n_docs // len(pools)
    records = []
    for subset, pool in pools.items():
        pool = sorted(set(pool))
        rng.shuffle(pool)
        take = pool[:per_subset]
        if len(take) < per_subset:
            raise SystemExit(f"subset {subset} has only {len(take)} documents")
        records.extend({"text": t, "meta": {"subset": subset}} for t in take)
    rng.shuffle(records)
    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    print(f"wrote {len(records)} documents to {out}")


if __name__ == "__main__":
    main()
