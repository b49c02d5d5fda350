"""Linking detections into tracks with the four association mechanisms,
including the crossing scenario where center distance demonstrably
swaps identities while embeddings do not.
"""

from motskit import TrackerConfig, compute_metrics, evaluate_sequence, run_tracker
from motskit.synth import generate, separated_objects_spec, two_object_crossing_spec


def score(sc, config, flow=None):
    tracks = run_tracker(sc.detections, {1: config}, flow)
    counts = evaluate_sequence(sc.gt, tracks, 1)
    motsa, _, smotsa = compute_metrics(counts)
    return counts, motsa, smotsa


print("== clean fixture: every mechanism is perfect ==")
clean = generate(separated_objects_spec(num_objects=3, num_frames=8, seed=5))
flow = lambda f: clean.flows[f]  # noqa: E731
for mechanism, delta, beta in [("embedding", 1.0, 5), ("mask_iou", 0.5, 1),
                               ("bbox_iou", 0.5, 1), ("bbox_center", 3.0, 1)]:
    counts, motsa, smotsa = score(clean, TrackerConfig(1, 0.5, beta, delta,
                                                       mechanism), flow)
    print(f"{mechanism:<12} sMOTSA={smotsa:.3f} MOTSA={motsa:.3f} "
          f"IDS={counts.num_ids}")

print("\n== crossing fixture: nearest-center pairing gets fooled ==")
cross = generate(two_object_crossing_spec())
for mechanism, delta, beta in [("embedding", 1.0, 5), ("bbox_center", 8.0, 1)]:
    counts, motsa, smotsa = score(cross, TrackerConfig(1, 0.5, beta, delta,
                                                       mechanism))
    print(f"{mechanism:<12} sMOTSA={smotsa:.3f} MOTSA={motsa:.3f} "
          f"IDS={counts.num_ids}")

print("\nLower confidence masks lose contested pixels during overlap")
print("resolution, so tracker output always satisfies the per-frame")
print("non-overlap requirement that evaluation relies on.")
