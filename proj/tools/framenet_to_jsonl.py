#!/usr/bin/env python3
"""Convert FrameNet full-text annotation XML into the corpus format used here.

Produces an ontology.json (frames, their role inventories, and a lemma ->
licensed-frames lexicon built from the lexical-unit files) plus one JSONL file
per requested split, with one sentence object per line:

    {"tokens": [...], "lemmas": [...] | null,
     "tuples": [{"predicate": [[s,e], ...], "frame": "...",
                 "roles": [{"name": "...", "span": [s,e]}, ...]}]}

Token indices are inclusive and come from the PENN part-of-speech layer of
each sentence, which carries the tokenizer's character offsets. Annotation
sets whose status is UANN, or whose target/role labels fall outside the
token map, are skipped with a note on stderr.

FrameNet releases are licensed and not shipped with this repository, so this
script is exercised only against the layout documented in the release README
files (fndata-1.5 and fndata-1.7): frameIndex.xml, frame/*.xml, and
fulltext/*.xml under the data root. Expect to adapt it if your release
differs.

Usage:
    python3 framenet_to_jsonl.py --fn-root /path/to/fndata-1.7 \
        --out-dir out --splits splits.json

splits.json maps split names to lists of full-text document names (without
the .xml suffix), e.g. {"train": ["ANC__110CYL067", ...], "dev": [...],
"test": [...]}. Without --splits, every document lands in train.jsonl.
"""

import argparse
import json
import re
import sys
import xml.etree.ElementTree as ET
from pathlib import Path

NS = {"fn": "http://framenet.icsi.berkeley.edu"}


def strip_ns(tag):
    return tag.split("}", 1)[-1]


def iter_children(elem, name):
    for child in elem:
        if strip_ns(child.tag) == name:
            yield child


def load_ontology(fn_root):
    """Frames with their frame-element inventories, plus the LU lexicon."""
    frames = {}
    lexicon = {}
    frame_dir = fn_root / "frame"
    if not frame_dir.is_dir():
        raise SystemExit(f"no frame/ directory under {fn_root}")
    for path in sorted(frame_dir.glob("*.xml")):
        try:
            root = ET.parse(path).getroot()
        except ET.ParseError as err:
            print(f"note: skipping unparseable {path.name}: {err}", file=sys.stderr)
            continue
        frame_name = root.get("name")
        if not frame_name:
            continue
        roles = [fe.get("name") for fe in iter_children(root, "FE") if fe.get("name")]
        frames[frame_name] = {"roles": sorted(set(roles))}
        for lu in iter_children(root, "lexUnit"):
            lu_name = lu.get("name") or ""
            # "run.v" -> "run"; multiword LUs keep their spaces.
            lemma = re.sub(r"\.[a-z]+$", "", lu_name).lower()
            if not lemma:
                continue
            lexicon.setdefault(lemma, set()).add(frame_name)
    return {
        "frames": frames,
        "lexicon": {k: sorted(v) for k, v in sorted(lexicon.items())},
    }


def token_map(sentence):
    """Inclusive character range per token, from the PENN layer."""
    for aset in iter_children(sentence, "annotationSet"):
        for layer in iter_children(aset, "layer"):
            if layer.get("name") != "PENN":
                continue
            spans = []
            for label in iter_children(layer, "label"):
                if label.get("start") is None or label.get("end") is None:
                    continue
                spans.append((int(label.get("start")), int(label.get("end"))))
            if spans:
                return sorted(spans)
    return []


def chars_to_tokens(start, end, tokens):
    """Smallest token range covering [start, end], or None if outside."""
    first = last = None
    for idx, (ts, te) in enumerate(tokens):
        if te >= start and first is None:
            first = idx
        if ts <= end:
            last = idx
    if first is None or last is None or first > last:
        return None
    return first, last


def convert_sentence(sentence, doc_name):
    text_elem = next(iter_children(sentence, "text"), None)
    text = text_elem.text or "" if text_elem is not None else ""
    tokens_chars = token_map(sentence)
    if not tokens_chars:
        return None
    tokens = [text[s : e + 1] for s, e in tokens_chars]

    tuples = []
    for aset in iter_children(sentence, "annotationSet"):
        frame = aset.get("frameName")
        if not frame or aset.get("status") == "UANN":
            continue
        pieces = []
        roles = []
        ok = True
        for layer in iter_children(aset, "layer"):
            lname = layer.get("name")
            if lname not in ("Target", "FE"):
                continue
            for label in iter_children(layer, "label"):
                if label.get("itype"):  # null instantiation, no surface span
                    continue
                if label.get("start") is None or label.get("end") is None:
                    continue
                rng = chars_to_tokens(
                    int(label.get("start")), int(label.get("end")), tokens_chars
                )
                if rng is None:
                    print(
                        f"note: {doc_name}: label outside token map, tuple dropped",
                        file=sys.stderr,
                    )
                    ok = False
                    break
                if lname == "Target":
                    pieces.append(list(rng))
                else:
                    roles.append({"name": label.get("name"), "span": list(rng)})
            if not ok:
                break
        if not ok or not pieces:
            continue
        pieces = sorted({tuple(p) for p in pieces})
        tuples.append(
            {
                "predicate": [list(p) for p in pieces],
                "frame": frame,
                "roles": sorted(roles, key=lambda r: (r["span"], r["name"])),
            }
        )
    return {"tokens": tokens, "lemmas": None, "tuples": tuples}


def convert_document(path):
    root = ET.parse(path).getroot()
    out = []
    for sentence in root.iter():
        if strip_ns(sentence.tag) != "sentence":
            continue
        converted = convert_sentence(sentence, path.stem)
        if converted is not None:
            out.append(converted)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fn-root", required=True, type=Path)
    ap.add_argument("--out-dir", required=True, type=Path)
    ap.add_argument("--splits", type=Path, help="JSON mapping split -> document names")
    args = ap.parse_args()

    args.out_dir.mkdir(parents=True, exist_ok=True)
    ontology = load_ontology(args.fn_root)
    with open(args.out_dir / "ontology.json", "w") as fh:
        json.dump(ontology, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"ontology: {len(ontology['frames'])} frames, "
        f"{len(ontology['lexicon'])} lexical units"
    )

    fulltext = args.fn_root / "fulltext"
    documents = sorted(fulltext.glob("*.xml"))
    if not documents:
        raise SystemExit(f"no fulltext/*.xml under {args.fn_root}")

    if args.splits:
        with open(args.splits) as fh:
            splits = json.load(fh)
    else:
        splits = {"train": [d.stem for d in documents]}

    by_name = {d.stem: d for d in documents}
    for split, names in splits.items():
        sentences = []
        for name in names:
            if name not in by_name:
                print(f"note: split {split}: no document named {name}", file=sys.stderr)
                continue
            sentences.extend(convert_document(by_name[name]))
        out_path = args.out_dir / f"{split}.jsonl"
        with open(out_path, "w") as fh:
            for s in sentences:
                fh.write(json.dumps(s, sort_keys=True) + "\n")
        print(f"{split}: {len(sentences)} sentences -> {out_path}")


if __name__ == "__main__":
    main()
