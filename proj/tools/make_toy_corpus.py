"""Regenerates the bundled toy corpus under data/toy from a tiny grammar."""

import random
from pathlib import Path

DETS = ["the", "a", "every", "that"]
ADJS = ["old", "small", "green", "quiet", "happy", "dark"]
NOUNS = ["dog", "cat", "farmer", "child", "bird", "teacher", "river", "house", "garden", "book", "horse", "song"]
VERBS = ["sees", "likes", "finds", "follows", "hears", "paints", "keeps", "visits"]
PREPS = ["near", "behind", "under", "beside"]


def noun_phrase(rng, tokens, heads, rels, head_of_np, rel):
    start = len(tokens)
    tokens.append(rng.choice(DETS))
    has_adj = rng.random() < 0.5
    if has_adj:
        tokens.append(rng.choice(ADJS))
    tokens.append(rng.choice(NOUNS))
    noun = len(tokens)
    heads.extend([noun] * (noun - start - 1) + [head_of_np])
    rels.extend(["det"] + (["amod"] if has_adj else []) + [rel])
    return noun


def sentence(rng):
    tokens, heads, rels = [], [], []
    # Subject head is patched once the verb index is known.
    subj = noun_phrase(rng, tokens, heads, rels, -1, "nsubj")
    tokens.append(rng.choice(VERBS))
    verb = len(tokens)
    heads.append(0)
    rels.append("root")
    heads[subj - 1] = verb
    if rng.random() < 0.8:
        noun_phrase(rng, tokens, heads, rels, verb, "obj")
    if rng.random() < 0.5:
        tokens.append(rng.choice(PREPS))
        prep = len(tokens)
        heads.append(-1)
        rels.append("case")
        noun = noun_phrase(rng, tokens, heads, rels, verb, "obl")
        heads[prep - 1] = noun
    return tokens, heads, rels


def main():
    rng = random.Random(20161)
    out = Path(__file__).resolve().parent.parent / "data" / "toy"
    out.mkdir(parents=True, exist_ok=True)
    train = [sentence(rng) for _ in range(400)]
    valid = [sentence(rng) for _ in range(60)]
    (out / "train.txt").write_text("".join(" ".join(t) + "\n" for t, _, _ in train))
    (out / "valid.txt").write_text("".join(" ".join(t) + "\n" for t, _, _ in valid))
    blocks = []
    for tokens, heads, rels in valid:
        blocks.append("".join(f"{i + 1}\t{tok}\t{h}\t{r}\n" for i, (tok, h, r) in enumerate(zip(tokens, heads, rels))))
    (out / "valid.conll").write_text("\n".join(blocks))
    items = []
    for k, (tokens, _, _) in enumerate(valid[:20]):
        verb = next(i for i, t in enumerate(tokens) if t in VERBS)
        gold = tokens[verb]
        candidates = ["river", "quiet", "under", "every"]
        slot = k % 5
        candidates.insert(slot, gold)
        blanked = tokens[:verb] + ["___"] + tokens[verb + 1:]
        items.append("\t".join([f"toy{k:02d}", " ".join(blanked)] + candidates + ["abcde"[slot]]) + "\n")
    (out / "items.tsv").write_text("".join(items))


if __name__ == "__main__":
    main()
