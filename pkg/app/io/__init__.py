"""
Import dataset loaders, image helpers and checkpoint functions
"""

from .dataset import Dataset, dataset_rays, merge_datasets
from .images import load_image, load_pose, save_depth, save_image
from .nerf_synthetic import load_nerf_synthetic, load_nerf_synthetic_scene
from .procedural import SceneSpec, default_scene, procedural_scene, specular_scene
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .loader import load_dataset
