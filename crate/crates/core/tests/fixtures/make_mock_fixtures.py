"""Writes the mock-backend fixture resources: word vectors and a small corpus.

Run from this directory: python3 make_mock_fixtures.py
"""
import random

VOCAB = "../../src/mlm/mock_vocab.txt"
SEED = 1234
DIM = 8


def words():
    out = []
    for line in open(VOCAB, encoding="utf-8"):
        tok = line.rstrip("\n")
        if tok.startswith("##") or tok.startswith("[") or not any(c.isalpha() for c in tok):
            continue
        out.append(tok)
    return out


def main():
    rng = random.Random(SEED)
    vocab = words()
    with open("mock/embeddings.vec", "w", encoding="utf-8") as f:
        f.write(f"{len(vocab)} {DIM}\n")
        for w in vocab:
            f.write(w + " " + " ".join(f"{rng.gauss(0, 1):.4f}" for _ in range(DIM)) + "\n")
    weights = [1.0 / (i + 1) for i in range(len(vocab))]
    with open("mock/corpus.txt", "w", encoding="utf-8") as f:
        for _ in range(3000):
            n = rng.randint(4, 14)
            sent = " ".join(rng.choices(vocab, weights=weights, k=n))
            f.write(sent.capitalize() + ".\n")


if __name__ == "__main__":
    main()
