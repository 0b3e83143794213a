#!/usr/bin/env python3
# Regenerates the bundled grayscale test images from scikit-image's
# "camera" photograph (CC0) by block-averaging down to 128x128 and 64x64.
import pathlib
import numpy as np
from skimage import data


def block_mean(img, size):
    f = img.shape[0] // size
    return img.reshape(size, f, size, f).mean(axis=(1, 3))


def write_pgm(path, img):
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (img.shape[1], img.shape[0]))
        fh.write(img.tobytes())


def main():
    out = pathlib.Path(__file__).resolve().parent.parent / "data"
    out.mkdir(exist_ok=True)
    cam = data.camera().astype(np.float64)
    for size in (128, 64):
        write_pgm(out / f"cameraman{size}.pgm", block_mean(cam, size))


if __name__ == "__main__":
    main()
