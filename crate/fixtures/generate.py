"""Regenerates the JSONL fixtures in this directory.

Deterministic: python3 fixtures/generate.py
"""

import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))


def write_jsonl(rel, rows):
    path = os.path.join(HERE, rel)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "w") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False, separators=(",", ":")) + "\n")


def song_durations(rng, total_s, n_songs, lo, hi):
    """Integer song lengths in [lo, hi] seconds summing exactly to total_s."""
    while True:
        raw = [rng.uniform(lo, hi) for _ in range(n_songs)]
        scale = total_s / sum(raw)
        durs = [int(round(d * scale)) for d in raw]
        durs[-1] += total_s - sum(durs)
        if all(lo <= d <= hi for d in durs):
            return durs


def corpus(prefix, genre, region, total_s, n_songs, melodies, rhythms, instruments, seed, pinned=()):
    rng = random.Random(seed)
    durs = song_durations(rng, total_s, n_songs, 900, 2520)
    rows = []
    for s, dur in enumerate(durs):
        song_id = f"{prefix}-{s + 1:03d}"
        if s < len(pinned):
            melody, rhythm, kit = pinned[s]
        else:
            melody = rng.choice(melodies)
            rhythm = rng.choice(rhythms)
            kit = sorted(rng.sample(instruments, rng.randint(1, 5)))
        clip = 0
        left = dur
        while left > 0:
            d = min(30, left)
            clip += 1
            rows.append({
                "id": f"{song_id}-{clip:03d}",
                "song_id": song_id,
                "genre": genre,
                "region": region,
                "duration_s": float(d),
                "melody": melody,
                "rhythm": rhythm,
                "instruments": kit,
            })
            left -= d
    return rows


HINDUSTANI = corpus(
    "hc", "Hindustani", "South Asian", 83664, 40,
    ["Raag " + r for r in ["Yaman", "Bhairavi", "Bageshree", "Malkauns", "Darbari Kanada", "Puriya Dhanashree",
                           "Todi", "Bihag", "Marwa", "Kedar", "Des", "Jog", "Khamaj", "Shree"]],
    [l + " " + t for l in ["Vilambit", "Madhya", "Drut"] for t in ["Teentaal", "Ektaal", "Jhaptaal", "Rupak"]],
    ["Voice", "Tabla", "Harmonium", "Tanpura", "Sarangi", "Sitar", "Sarod", "Bansuri", "Santoor", "Pakhawaj"],
    seed=11,
)

MAKAM = corpus(
    "tm", "Makam", "Middle Eastern", 436176, 256,
    [m + " makam" for m in ["Hicaz", "Rast", "Ussak", "Segah", "Huzzam", "Nihavent", "Saba", "Kurdilihicazkar",
                            "Huseyni", "Acem", "Mahur", "Aksak"]],
    [u + " usul" for u in ["Aksak", "Duyek", "Sofyan", "Curcuna", "Aksak semai", "Hicaz", "Fahte", "Devr-i kebir",
                           "Semai", "Nim sofyan"]],
    ["Cello", "Clarinet", "Darbuka", "Kanun", "Kemence", "Ney", "Oud", "Tanbur", "Violin", "Voice", "Bendir"],
    seed=23,
    pinned=[
        ("Aksak makam", "Hicaz usul", ["Clarinet", "Darbuka", "Kanun", "Oud", "Voice"]),
        ("Acem makam", "Fahte usul", ["Tanbur"]),
    ],
)


REGIONS = [
    ("European", 66, 6127.92),
    ("East Asian", 71, 2746.73),
    ("South Asian", 1, 88.78),
    ("Central Asian", 0, 57.01),
    ("American", 72, 921.84),
    ("Latin American", 5, 323.25),
    ("Oceania", 3, 41.99),
    ("African", 0, 27.50),
    ("Middle Eastern", 5, 37.86),
]

# Durations in thousands of hours; "-" paper counts recorded as 0.
GENRES = [
    ("Pop", 24, 206.89),
    ("Rock", 7, 186.67),
    ("Electronic", 36, 140.25),
    ("Classical", 91, 144.64),
    ("Country", 0, 95.77),
    ("Hip-hop", 3, 64.35),
    ("Jazz", 15, 60.62),
    ("Blues", 0, 64.01),
    ("Easy Listening", 2, 74.39),
    ("Folk", 3, 22.802),
    ("Experimental", 26, 11.310),
    ("Others", 15, 0.94),
]

EXCLUDED_HOURS = [812, 640, 590, 555, 531, 488, 462, 420, 388, 351, 297, 238]
assert sum(EXCLUDED_HOURS) == 5772


def census():
    rows = []
    for name, papers, hours in REGIONS:
        rows.append({"name": f"region/{name}", "region": name, "hours": hours, "papers": papers, "annotated": True})
    for name, papers, kh in GENRES:
        rows.append({"name": f"genre/{name}", "genre": name, "hours": round(kh * 1000, 3), "papers": papers,
                     "annotated": True})
    for i, h in enumerate(EXCLUDED_HOURS):
        rows.append({"name": f"unlabelled-{i + 1:02d}", "hours": float(h), "papers": 1, "excluded": True,
                     "exclusion_reason": "region and genre not stated in source or metadata"})
    return rows


OPTIONS = ["A_MUCH_BETTER", "A_BETTER", "EQUAL", "B_BETTER", "B_MUCH_BETTER"]
CRITERIA = ["OA", "Inst", "MC", "RC", "CR"]
QUERY_TYPES = ["Recall", "Analysis", "Creativity"]


def annotation_log():
    """Both genres under the published two-phase protocol."""
    rng = random.Random(5)
    phase1_pairs = [("MGB", "MTB"), ("MGB", "MGF"), ("MTB", "MTF"), ("MGF", "MTF")]
    phase2_drop = {"Hindustani": ("MGB", "MGF"), "Makam": ("MTB", "MTF")}
    rows = []
    ts = 1_700_000_000_000
    aid = 0

    def judgments():
        j = {c: rng.choice(OPTIONS) for c in CRITERIA}
        if rng.random() < 0.15:
            j["CR"] = rng.choice(["NONE", "NOT_APPLICABLE"])
        return j

    def emit(match_id, annotator, phase, a, b, genre, qt, prompt, j, kind="annotation", amends=None):
        nonlocal ts, aid
        aid += 1
        ts += rng.randint(2_000, 90_000)
        r = {"annotation_id": aid, "match_id": match_id, "annotator_id": annotator, "judgments": j,
             "timestamp_ms": ts, "phase": phase, "kind": kind}
        if amends is not None:
            r["amends"] = amends
        r.update({"system_a": a, "system_b": b, "genre": genre, "query_type": qt, "prompt_id": prompt})
        rows.append(r)
        return aid

    for genre, tag in [("Hindustani", "hc"), ("Makam", "tm")]:
        m = 0
        first_ids = []
        for pair in phase1_pairs:
            for qt in QUERY_TYPES:
                for q in range(3):
                    m += 1
                    a, b = pair if rng.random() < 0.5 else pair[::-1]
                    prompt = f"{tag}-{qt.lower()}-{q + 1:02d}"
                    base = judgments()
                    for annotator in ["ann1", "ann2"]:
                        j = dict(base) if rng.random() < 0.6 else judgments()
                        i = emit(f"{tag}-p1-{m:03d}", f"{tag}-{annotator}", 1, a, b, genre, qt, prompt, j)
                        first_ids.append((i, f"{tag}-p1-{m:03d}", f"{tag}-{annotator}", a, b, qt, prompt, j))
        for i, match, annotator, a, b, qt, prompt, j in first_ids[:3]:
            fixed = dict(j)
            fixed["Inst"] = rng.choice(OPTIONS)
            fixed["RC"] = rng.choice(OPTIONS)
            emit(match, annotator, 1, a, b, genre, qt, prompt, fixed, kind="amendment", amends=i)
        pairs2 = [p for p in phase1_pairs if p != phase2_drop[genre]]
        for pair in pairs2:
            for qt in QUERY_TYPES:
                for q in range(7):
                    m += 1
                    a, b = pair if rng.random() < 0.5 else pair[::-1]
                    annotator = f"{tag}-ann{1 + m % 2}"
                    emit(f"{tag}-p2-{m:03d}", annotator, 2, a, b, genre, qt, f"{tag}-{qt.lower()}-{q + 4:02d}",
                         judgments())
    return rows


def kappa_fixture():
    """Six paired Inst judgments plus one pair dropped for NOT_APPLICABLE."""
    first = ["A_MUCH_BETTER", "A_BETTER", "EQUAL", "B_BETTER", "B_MUCH_BETTER", "A_BETTER", "NOT_APPLICABLE"]
    second = ["A_MUCH_BETTER", "A_MUCH_BETTER", "A_BETTER", "EQUAL", "A_BETTER", "B_BETTER", "A_BETTER"]
    rows = []
    aid = 0
    for m, (j1, j2) in enumerate(zip(first, second)):
        for annotator, j in [("ann1", j1), ("ann2", j2)]:
            aid += 1
            rows.append({"annotation_id": aid, "match_id": f"k-{m + 1:02d}", "annotator_id": annotator,
                         "judgments": {c: (j if c == "Inst" else "EQUAL") for c in CRITERIA},
                         "timestamp_ms": 1000 * aid, "phase": 1, "kind": "annotation",
                         "system_a": "MGB", "system_b": "MTF", "genre": "Hindustani", "query_type": "Recall",
                         "prompt_id": f"k-{m + 1:02d}"})
    return rows


if __name__ == "__main__":
    write_jsonl("corpus/hindustani.jsonl", HINDUSTANI)
    write_jsonl("corpus/makam.jsonl", MAKAM)
    write_jsonl("census/datasets.jsonl", census())
    write_jsonl("annotations/protocol.jsonl", annotation_log())
    write_jsonl("annotations/kappa_pairs.jsonl", kappa_fixture())
    os.makedirs(os.path.join(HERE, "prompts"), exist_ok=True)
    with open(os.path.join(HERE, "prompts/foreign_pools.json"), "w") as f:
        json.dump({
            "genres": ["Western Electronic Dance Music (EDM)", "Jazz", "Flamenco", "Lo-fi Hip-hop"],
            "melodies": ["Dorian mode", "Blues scale", "Phrygian dominant scale"],
            "rhythms": ["Four-on-the-floor beat", "Swing groove", "Breakbeat"],
            "instruments": ["Synthesizer", "Drum machine", "Electric guitar", "Saxophone", "Double bass"],
        }, f, indent=2)
        f.write("\n")
    for name, rows in [("hindustani", HINDUSTANI), ("makam", MAKAM)]:
        songs = {}
        for r in rows:
            songs[r["song_id"]] = songs.get(r["song_id"], 0) + r["duration_s"]
        print(name, len(rows), "clips", len(songs), "songs", sum(songs.values()) / 3600, "h",
              "max song", max(songs.values()) / 3600, "h")
