"""
Image inpainting and denoising
==============================

A colour image is an ``h x w x 3`` tensor. For colour data the gradient set
is the two spatial modes. Two experiments on one image:

* completion from 20% of the pixels,
* robust PCA on 10% salt-and-pepper noise.

Pass ``--image some.png`` to use your own picture; otherwise a smooth
synthetic test card is generated. Results are written next to this script
when ``--out`` is given.
"""

import argparse
from pathlib import Path

import numpy as np

from twctv import SolverConfig, rlrtc_solve
from twctv.experiments import add_salt_pepper, gen_bernoulli_mask, psnr, rgb_test_card
from twctv.io import read_image, write_image

parser = argparse.ArgumentParser()
parser.add_argument("--image", type=Path, default=None)
parser.add_argument("--out", type=Path, default=None)
args = parser.parse_args()

img = read_image(args.image) if args.image else rgb_test_card()
print("image", img.shape)

# completion
mask = gen_bernoulli_mask(img.shape, 0.2, seed=0)
observed = np.where(mask, img, 0.0)
res = rlrtc_solve(observed, mask, SolverConfig(mode="completion"))
print(f"completion: observed PSNR {psnr(observed, img):.2f} dB -> {psnr(res.X, img):.2f} dB ({res.iterations} iterations)")

# salt-and-pepper denoising
noisy = add_salt_pepper(img, 0.1, seed=1)
den = rlrtc_solve(noisy, None, SolverConfig(mode="trpca"))
print(f"denoising:  noisy PSNR {psnr(noisy, img):.2f} dB -> {psnr(den.X, img):.2f} dB ({den.iterations} iterations)")

if args.out:
    args.out.mkdir(parents=True, exist_ok=True)
    write_image(args.out / "observed.png", observed)
    write_image(args.out / "completed.png", res.X)
    write_image(args.out / "noisy.png", noisy)
    write_image(args.out / "denoised.png", den.X)
