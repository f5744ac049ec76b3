"""Weakly supervised teeth segmentation toolkit.

Library layout:

- ``imaging``    raster types, color conversion, resampling, PNG/PPM/FMAP I/O
- ``classical``  Otsu, morphology, hole filling, components, distance
  transform, bright-spot detection, diffusion inpainting
- ``keypoints``  heatmap rendering/decoding, Hungarian matching, metrics
- ``fusion``     multi-layer feature-map fusion into a salience map
- ``crf``        two-label dense-CRF mean-field refinement (windowed)
- ``watershed``  keypoint-boosted topography + marker-controlled flooding
- ``pipeline``   end-to-end segmentation methods and baselines
- ``metrics``    mask IoU/P/R/F1 and directory evaluation reports
- ``synth``      deterministic synthetic dental-scene generator
- ``plots``      matplotlib figures for evaluation reports
- ``cli``        the ``toothseg`` command-line entry point
- ``service``    HTTP API for annotation and prompted segmentation
"""

__version__ = "0.1.0"
