#!/usr/bin/env python3
"""Generate the frozen reference fixtures used by the Rust test suites.

Everything here runs offline against independent implementations:

* tokenizer parity  - HuggingFace GPT2Tokenizer over assets/gpt2/{encoder.json,vocab.bpe}
* logit parity      - HuggingFace GPT2LMHeadModel (PyTorch, fp32, eager attention)
                      loaded with the seeded synthetic GPT-2 Small checkpoint
* statistics        - scipy.stats.skew / ks_2samp / scipy.special.kolmogorov

The synthetic checkpoint is a counter-based splitmix64 stream keyed by tensor
name; `headscope_core::model_io::synthetic` implements the same generator, so
both sides see bit-identical weights without shipping a 500 MB file.

usage: make_reference_fixtures.py [tokenizer|logits|stats|all]
"""

import json
import os
import struct
import sys

import numpy as np

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
ASSETS = os.path.join(ROOT, "assets")
FIXTURES = os.path.join(ROOT, "crates", "core", "tests", "fixtures")

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
MIX1 = np.uint64(0xBF58476D1CE4E5B9)
MIX2 = np.uint64(0x94D049BB133111EB)

SYNTH_SEED = 7

# (half-width, offset) per tensor role; mirrored in synthetic.rs
SCALES = {
    "wte": (0.2, 0.0),
    "wpe": (0.05, 0.0),
    "ln_weight": (0.1, 1.0),
    "ln_bias": (0.05, 0.0),
    "qkv_weight": (0.1, 0.0),
    "qkv_bias": (0.05, 0.0),
    "attn_out_weight": (0.05, 0.0),
    "attn_out_bias": (0.02, 0.0),
    "fc_weight": (0.1, 0.0),
    "fc_bias": (0.05, 0.0),
    "proj_weight": (0.03, 0.0),
    "proj_bias": (0.02, 0.0),
}

PROMPTS = [
    "Hello, my dog is",
    "while baseball stadiums can come and",
    "The quick brown fox jumps over the lazy",
    "Permission is hereby granted, free of charge, to any person obtaining a copy",
    "def main():\n    return 0",
]


def fnv1a64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def synth_tensor(name, shape, role, seed=SYNTH_SEED):
    half, offset = SCALES[role]
    n = int(np.prod(shape))
    key = np.uint64(fnv1a64(name.encode()) ^ seed)
    with np.errstate(over="ignore"):
        idx = np.arange(1, n + 1, dtype=np.uint64)
        z = key + idx * GOLDEN
        z = (z ^ (z >> np.uint64(30))) * MIX1
        z = (z ^ (z >> np.uint64(27))) * MIX2
        z = z ^ (z >> np.uint64(31))
    k = (z >> np.uint64(40)).astype(np.float32)
    u = k * np.float32(1.0 / (1 << 24))
    v = (u * np.float32(2.0) - np.float32(1.0)) * np.float32(half) + np.float32(offset)
    return v.astype(np.float32).reshape(shape)


def gpt2_small_tensors():
    V, P, D, M, L = 50257, 1024, 768, 3072, 12
    out = [("wte.weight", (V, D), "wte"), ("wpe.weight", (P, D), "wpe")]
    for l in range(L):
        p = f"h.{l}."
        out += [
            (p + "ln_1.weight", (D,), "ln_weight"),
            (p + "ln_1.bias", (D,), "ln_bias"),
            (p + "attn.c_attn.weight", (D, 3 * D), "qkv_weight"),
            (p + "attn.c_attn.bias", (3 * D,), "qkv_bias"),
            (p + "attn.c_proj.weight", (D, D), "attn_out_weight"),
            (p + "attn.c_proj.bias", (D,), "attn_out_bias"),
            (p + "ln_2.weight", (D,), "ln_weight"),
            (p + "ln_2.bias", (D,), "ln_bias"),
            (p + "mlp.c_fc.weight", (D, M), "fc_weight"),
            (p + "mlp.c_fc.bias", (M,), "fc_bias"),
            (p + "mlp.c_proj.weight", (M, D), "proj_weight"),
            (p + "mlp.c_proj.bias", (D,), "proj_bias"),
        ]
    out += [("ln_f.weight", (D,), "ln_weight"), ("ln_f.bias", (D,), "ln_bias")]
    return out


def tokenizer():
    from transformers import GPT2Tokenizer

    tok = GPT2Tokenizer(
        os.path.join(ASSETS, "gpt2", "encoder.json"),
        os.path.join(ASSETS, "gpt2", "vocab.bpe"),
    )
    lines = []
    with open(os.path.join(ASSETS, "corpus", "sample-2000.jsonl"), encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            if i >= 88:
                break
            lines.append(json.loads(line)["text"])
    lines += [
        "",
        " go",
        "Hello, world",
        "I'm sure they'll say it's   fine, don't you think?",
        "naïve café — 東京 🚀 emoji nbsp",
        "   leading and trailing spaces   ",
        "numbers 12345 and 3.14159 and 1,000,000",
        "line\nbreaks\r\nand\ttabs",
        "CAPS'LL'VE'RE ''' \"quoted\"",
        "while baseball stadiums can come and",
        "ALL THE way",
        "x" * 300,
    ]
    with open(os.path.join(FIXTURES, "tokenizer_parity.jsonl"), "w", encoding="utf-8") as fh:
        for text in lines:
            ids = tok.encode(text)
            fh.write(json.dumps({"text": text, "ids": ids}, ensure_ascii=False) + "\n")
    print(f"tokenizer: {len(lines)} lines")


def logits():
    import torch
    from transformers import GPT2Config, GPT2LMHeadModel, GPT2Tokenizer

    torch.set_num_threads(1)
    cfg = GPT2Config(attn_implementation="eager")
    model = GPT2LMHeadModel(cfg).eval()
    state = {}
    for name, shape, role in gpt2_small_tensors():
        state["transformer." + name] = torch.from_numpy(synth_tensor(name, shape, role))
    state["lm_head.weight"] = state["transformer.wte.weight"]
    missing, unexpected = model.load_state_dict(state, strict=False)
    missing = [m for m in missing if not m.endswith("attn.bias") and not m.endswith("masked_bias")]
    assert not missing and not unexpected, (missing, unexpected)

    tok = GPT2Tokenizer(
        os.path.join(ASSETS, "gpt2", "encoder.json"),
        os.path.join(ASSETS, "gpt2", "vocab.bpe"),
    )
    meta = []
    blob = bytearray()
    with torch.no_grad():
        for prompt in PROMPTS:
            ids = tok.encode(prompt)
            out = model(torch.tensor([ids])).logits[0]
            last = out[-1].numpy().astype("<f4")
            meta.append(
                {
                    "prompt": prompt,
                    "ids": ids,
                    "top1_per_position": out.argmax(-1).tolist(),
                    "offset": len(blob) // 4,
                }
            )
            blob += last.tobytes()
    with open(os.path.join(FIXTURES, "gpt2_small_synth_logits.json"), "w") as fh:
        json.dump({"seed": SYNTH_SEED, "vocab_size": 50257, "prompts": meta}, fh, indent=1)
    with open(os.path.join(FIXTURES, "gpt2_small_synth_logits.f32"), "wb") as fh:
        fh.write(bytes(blob))
    # small probe so the Rust generator can be checked without a full model
    probe = {}
    for name, shape, role in gpt2_small_tensors()[:6]:
        t = synth_tensor(name, shape, role).reshape(-1)
        probe[name] = [struct.unpack("<I", struct.pack("<f", float(x)))[0] for x in t[:8]]
    with open(os.path.join(FIXTURES, "synth_probe.json"), "w") as fh:
        json.dump(probe, fh, indent=1)
    print(f"logits: {len(PROMPTS)} prompts")


def stats():
    from scipy import special, stats as st

    rng = np.random.default_rng(20240611)
    fixtures = {}

    skew_values = rng.gamma(2.0, 1.5, size=50)
    fixtures["skewness_50"] = {
        "values": skew_values.tolist(),
        "skewness": float(st.skew(skew_values, bias=True)),
    }

    def ks_case(a, b):
        res = st.ks_2samp(a, b)
        n, m = len(a), len(b)
        en = np.sqrt(n * m / (n + m))
        return {
            "a": a.tolist(),
            "b": b.tolist(),
            "d": float(res.statistic),
            "p_asymptotic": float(special.kolmogorov(en * res.statistic)),
        }

    fixtures["ks_40_60"] = ks_case(rng.normal(0.0, 1.0, 40), rng.normal(0.5, 1.2, 60))
    fixtures["ks_30_30"] = ks_case(rng.normal(0.0, 0.02, 30), rng.normal(0.01, 0.02, 30))
    with open(os.path.join(FIXTURES, "stats_reference.json"), "w") as fh:
        json.dump(fixtures, fh, indent=1)
    print("stats: written")


if __name__ == "__main__":
    os.makedirs(FIXTURES, exist_ok=True)
    what = sys.argv[1] if len(sys.argv) > 1 else "all"
    if what in ("tokenizer", "all"):
        tokenizer()
    if what in ("stats", "all"):
        stats()
    if what in ("logits", "all"):
        logits()
