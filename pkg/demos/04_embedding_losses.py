"""The three association losses on labeled embedding sets, with an
analytic-vs-numeric gradient check.
"""

import numpy as np

from motskit import (
    LabeledEmbeddings,
    batch_all_loss,
    batch_hard_loss,
    contrastive_loss,
    loss_gradient,
)

rng = np.random.default_rng(7)

print("== two tight, well-separated clusters: triplet losses vanish ==")
vectors = np.concatenate([rng.normal(0, 0.01, (4, 8)),
                          rng.normal(6, 0.01, (4, 8))])
data = LabeledEmbeddings(vectors, (1, 1, 1, 1, 2, 2, 2, 2), margin=0.2)
print("batch hard :", batch_hard_loss(data))
print("batch all  :", batch_all_loss(data))
print("contrastive:", contrastive_loss(data))

print("\n== everything collapsed to one point: hinges sit at the margin ==")
collapsed = LabeledEmbeddings(np.zeros((4, 8)), (1, 1, 2, 2), margin=0.2)
print("batch hard :", batch_hard_loss(collapsed))
print("batch all  :", batch_all_loss(collapsed))

print("\n== the printed all-pairs form cancels to the margin ==")
print("as printed :", batch_all_loss(data, as_printed=True))

print("\n== analytic gradient vs central finite differences ==")
mixed = LabeledEmbeddings(rng.normal(0, 1, (5, 3)), (1, 1, 2, 2, 3), margin=0.2)
result = loss_gradient("batch_hard", mixed)
step = 1e-6
fd = np.zeros_like(mixed.vectors)
for i in range(5):
    for j in range(3):
        plus = mixed.vectors.copy()
        plus[i, j] += step
        minus = mixed.vectors.copy()
        minus[i, j] -= step
        fd[i, j] = (batch_hard_loss(LabeledEmbeddings(plus, mixed.ids, 0.2))
                    - batch_hard_loss(LabeledEmbeddings(minus, mixed.ids, 0.2))) / (2 * step)
print("smooth point:", result.smooth)
print("max |analytic - numeric|:", float(np.abs(result.gradients - fd).max()))
