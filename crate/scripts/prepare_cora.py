"""Turn the LINQS Cora files (cora.content, cora.cites) into cora-like input.

Usage: python3 scripts/prepare_cora.py SRC_DIR OUT_DIR

The word attributes are anonymous vocabulary indices, so every paper's
abstract becomes the list of its present words, spelled w<index>.
"""

import json
import sys
from pathlib import Path

CATEGORIES = [
    ("Case_Based", "case based reasoning, retrieving and adapting solutions of similar past problems"),
    ("Genetic_Algorithms", "genetic algorithms and evolutionary computation with populations, mutation and crossover"),
    ("Neural_Networks", "neural networks, connectionist models trained by gradient methods"),
    ("Probabilistic_Methods", "probabilistic methods, bayesian networks and statistical inference"),
    ("Reinforcement_Learning", "reinforcement learning of policies from rewards by trial and error"),
    ("Rule_Learning", "rule learning, inductive logic programming and decision rules"),
    ("Theory", "theory of machine learning, learnability and complexity bounds"),
]


def main(src: Path, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(src / "cora.content") as f, open(out / "papers.jsonl", "w") as w:
        for line in f:
            cols = line.split()
            if not cols:
                continue
            words = [f"w{i:04d}" for i, v in enumerate(cols[1:-1]) if v == "1"]
            row = {"id": cols[0], "title": "", "abstract": " ".join(words), "label": cols[-1]}
            w.write(json.dumps(row) + "\n")
    with open(src / "cora.cites") as f, open(out / "citations.tsv", "w") as w:
        for line in f:
            cols = line.split()
            if len(cols) == 2:
                w.write(f"{cols[1]}\t{cols[0]}\n")
    with open(out / "categories.jsonl", "w") as w:
        for name, desc in CATEGORIES:
            w.write(json.dumps({"name": name, "description": desc}) + "\n")


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    main(Path(sys.argv[1]), Path(sys.argv[2]))
