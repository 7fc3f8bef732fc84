"""Scores fresh random prediction files with the pip conlleval package and
with `lmseg eval --json`, and compares overall and per-label counts and scores.

usage: conlleval_live.py LMSEG_BINARY [COUNT] [SEED]
"""

import json
import os
import subprocess
import sys
import tempfile

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures"))

import conlleval  # noqa: E402
from make_conlleval_fixtures import crafted, random_fixtures  # noqa: E402


def lines_of(sentences):
    lines = []
    for s in sentences:
        lines += ["%s %s %s" % row for row in s]
        lines.append("")
    return lines


def close(a, b):
    return abs(a - b) <= 1e-9


def compare(name, reference, records):
    overall = next(r for r in records if r["label"] is None)
    problems = []
    stats = reference["overall"]["chunks"]["stats"]
    for key, ref_key in (("gold", "gold"), ("predicted", "pred"), ("correct", "correct")):
        if overall[key] != stats[ref_key]:
            problems.append("%s %s: %s vs %s" % (name, key, overall[key], stats[ref_key]))
    evals = reference["overall"]["chunks"]["evals"]
    precision = evals["prec"] if stats["pred"] > 0 else 0.0
    for key, value in (("precision", precision), ("recall", evals["rec"]), ("f1", evals["f1"])):
        if not close(overall[key], value):
            problems.append("%s %s: %r vs %r" % (name, key, overall[key], value))
    tags = reference["overall"]["tags"]["stats"]
    if not close(overall["accuracy"], tags["correct"] / tags["gold"]):
        problems.append("%s accuracy" % name)
    labels = {r["label"]: r for r in records if r["label"] is not None}
    for label, ref in reference["slots"]["chunks"].items():
        ref_stats = ref["stats"]
        if ref_stats["gold"] == 0 and ref_stats["pred"] == 0:
            continue
        ours = labels.get(label)
        if ours is None:
            problems.append("%s: label %s missing" % (name, label))
        elif (ours["gold"], ours["predicted"], ours["correct"]) != (
                ref_stats["gold"], ref_stats["pred"], ref_stats["correct"]):
            problems.append("%s: label %s counts differ" % (name, label))
    return problems


def main():
    binary = sys.argv[1]
    count = int(sys.argv[2]) if len(sys.argv) > 2 else 100
    seed = int(sys.argv[3]) if len(sys.argv) > 3 else 31337
    problems = []
    fixtures = list(crafted()) + list(random_fixtures(count, seed))
    with tempfile.TemporaryDirectory() as tmp:
        for name, sentences in fixtures:
            lines = lines_of(sentences)
            path = os.path.join(tmp, name + ".txt")
            with open(path, "w") as f:
                f.write("\n".join(lines) + "\n")
            out = subprocess.run([binary, "eval", path, "--json"], check=True,
                                 capture_output=True, text=True).stdout
            records = [json.loads(line) for line in out.splitlines() if line.strip()]
            problems += compare(name, conlleval.evaluate(lines), records)
    for p in problems:
        print(p)
    print("%d files, %d disagreements" % (len(fixtures), len(problems)))
    return 1 if problems else 0


if __name__ == "__main__":
    sys.exit(main())
