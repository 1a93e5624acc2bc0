"""
Simulated terrain recognition and ranked voting
===============================================

The vision classifier is replaced by a confusion-matrix model.  Within each
step the mid-level controller sums prediction confidences per class and
latches the winner at the next maximum hip extension.
"""

import numpy as np

from exoctl.classifier import PAPER_DIAGONAL, SimulatedClassifier, empirical_confusion, paper_fig_c
from exoctl.domain import IS, LG, TERRAINS
from exoctl.mid_level import EMPTY_VOTE, accumulate_vote, latch_class

spec = paper_fig_c()
print("configured diagonal (IS, LG, DS):", PAPER_DIAGONAL)
print(np.round(spec.matrix, 4))

###############################################################################
# Frame-by-frame draws reproduce the matrix rows.

spec.persistence = "frame"
clf = SimulatedClassifier(spec)
rng = np.random.default_rng(1)
truth = [TERRAINS[i] for i in rng.integers(0, 3, 30_000)]
pred = [clf.classify(t, k / 30).terrain for k, t in enumerate(truth)]
print("empirical confusion:")
print(np.round(empirical_confusion(truth, pred), 4))

###############################################################################
# One step on stairs: about 30 frames, each with a confidence.  The vote
# latches the class with the largest summed confidence; ties keep the
# previous class.

clf = SimulatedClassifier(paper_fig_c())
vote = EMPTY_VOTE
for k in range(30):
    vote = accumulate_vote(vote, clf.classify(IS, k / 30, episode=k // 10))
print(f"counters IS={vote.c_is:.2f} LG={vote.c_lg:.2f} DS={vote.c_ds:.2f}"
      f"  (frames {vote.n_is}/{vote.n_lg}/{vote.n_ds})")
print("latched:", latch_class(vote, LG).value)
