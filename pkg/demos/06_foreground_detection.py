"""
Background subtraction
======================

A static background is low rank across frames; a moving object is sparse.
Robust PCA splits the video, and thresholding the sparse part at one
standard deviation per frame followed by a 5 x 5 median filter gives the
foreground masks.
"""

import numpy as np

from twctv import SolverConfig, rlrtc_solve
from twctv.experiments import foreground_mask, moving_block_video, precision_recall_f

video, truth = moving_block_video(height=48, width=48, frames=20, block=12, seed=0)
print("video", video.shape, "foreground fraction", f"{truth.mean():.3f}")

result = rlrtc_solve(video, None, SolverConfig(mode="trpca"))
print(f"{result.iterations} iterations, converged {result.converged}")

masks = foreground_mask(result.E, window=5)
precision, recall, f = precision_recall_f(masks, truth)
print(f"precision {precision:.3f}  recall {recall:.3f}  F {f:.3f}")

# a crude text rendering of one frame
frame = 10
for row in range(0, 48, 3):
    print("".join("#" if masks[row, col, frame] else ("+" if truth[row, col, frame] else ".") for col in range(0, 48, 2)))
