"""Pairing an edited facade back onto its source, level by level.

The 5-floor variant has two more floors than its 3-floor source, so
several outputs must share a source.  Matching restricts every symbol's
candidates to the children of its parent's match, which keeps window
pairings inside the right floor, and picks the candidate with the
lowest combined distance.
"""

from pathlib import Path

from prodg import expand, explain_pairing, match_trees, parse_procedure, rasterize

OUT = Path(__file__).parent / "output"
if not (OUT / "facade.json").exists() or not (OUT / "facade_5floors.json").exists():
    raise SystemExit("run demos 01 and 02 first")

p_in = parse_procedure((OUT / "facade.json").read_text())
p_out = parse_procedure((OUT / "facade_5floors.json").read_text())

t_in, t_out = expand(p_in), expand(p_out)
seg_in = rasterize(t_in, 128, 128)
seg_out = rasterize(t_out, 128, 128)

pairings = match_trees(t_in, t_out, seg_in, seg_out)
print(f"{len(pairings)} output symbols paired; total score {pairings.total_score():.6f}\n")

print(" out -> in   score     level                category")
for p in pairings.pairings:
    cat = t_out[p.out_id].category
    print(f"  {p.out_id:>2} -> {p.in_id:<4} {p.score:.6f}  {p.fallback_level:<20} {cat}")

# five floors onto three sources: reuse is expected and deliberate
floor_ids = [s.id for s in t_out.symbols if s.category == "floor"]
sources = [pairings[i].in_id for i in floor_ids]
print("\nfloor sources:", sources, "(3 distinct sources feed 5 floors)")

# candidate-level view of one pairing
print("\n" + explain_pairing(pairings, floor_ids[-1]))
