#!/usr/bin/env python3
"""Write a small synthetic product file in the raw ingest format.

    python tools/make_sample_catalog.py [--per-category 36] [--seed 7] [--output data/sample_products.jsonl]
"""

import argparse
import json
import random
from pathlib import Path

CATEGORIES = {
    "Grocery & Gourmet Food": (
        ["Tea", "Coffee", "Honey", "Granola", "Olive Oil", "Hot Sauce", "Chocolate", "Trail Mix", "Spice Rub"],
        ["organic", "small batch", "gift box", "resealable pouch", "single origin", "no added sugar"],
        (6, 45),
    ),
    "Clothing Shoes & Jewelry": (
        ["Sneakers", "Rain Jacket", "Wool Scarf", "Leather Belt", "Watch", "Backpack", "Sunglasses", "Hoodie"],
        ["water resistant", "machine washable", "adjustable fit", "gift box", "vegan leather", "breathable"],
        (15, 140),
    ),
    "Home & Kitchen": (
        ["Chef Knife", "Dutch Oven", "Throw Blanket", "Desk Lamp", "Spice Rack", "Cutting Board", "Kettle"],
        ["dishwasher safe", "stackable", "easy assembly", "BPA free", "space saving", "heat resistant"],
        (12, 180),
    ),
    "Electronics": (
        ["Wireless Earbuds", "Power Bank", "Bluetooth Speaker", "Webcam", "Smart Plug", "USB Hub", "E-Reader"],
        ["USB-C charging", "20 hour battery", "noise cancelling", "compact", "one year warranty", "fast pairing"],
        (15, 220),
    ),
}
ORIENTATIONS = ["men", "women", "unisex"]
ADJECTIVES = ["Classic", "Everyday", "Premium", "Compact", "Deluxe", "Essential", "Signature", "Travel"]
STORES = ["Northwind", "Bluebird Co.", "Maple & Pine", "Arcadia", "Kestrel", "Lumen Goods"]
ISSUES = ["Shipping Delay", "Wrong Item Received", "Change of Mind", "Damaged on Arrival", "Not as Described"]


def make(per_category: int, seed: int):
    rng = random.Random(seed)
    n = 0
    for raw, (nouns, feats, (lo, hi)) in CATEGORIES.items():
        for i in range(per_category):
            noun = nouns[i % len(nouns)]
            rec = {
                "parent_asin": f"SAMPLE{n:04d}",
                "title": f"{rng.choice(ADJECTIVES)} {noun} {i + 1}",
                "category": raw,
                "store": rng.choice(STORES),
                "price": round(rng.uniform(lo, hi), 2),
                "discount_rate": rng.choice([0.05, 0.10, 0.15, 0.20]),
                "features": rng.sample(feats, 3),
            }
            if raw.startswith("Clothing"):
                orientation = ORIENTATIONS[i % 3]
                rec["orientation"] = orientation
                rec["title"] = f"{rec['title']} ({orientation})"
            if rng.random() < 0.5:
                rec["post_issue"] = rng.choice(ISSUES)
            n += 1
            yield rec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--per-category", type=int, default=36)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--output", default=str(Path(__file__).resolve().parent.parent / "data" / "sample_products.jsonl"))
    args = ap.parse_args()
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as f:
        for rec in make(args.per_category, args.seed):
            f.write(json.dumps(rec) + "\n")


if __name__ == "__main__":
    main()
