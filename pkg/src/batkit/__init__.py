"""batkit: a desk-scale bidirectional language-model training kit.

Library surface: tensor autodiff (batkit.tensor), the direction-conditioned
transformer (batkit.model), training objectives (batkit.training), RLHF
(batkit.rlhf), function-preserving growth (batkit.expansion), byte-level
data tooling (batkit.data), checkpoints (batkit.checkpoint), the exam
harness (batkit.exams), and the annotation service (batkit.service).
"""

__version__ = "0.1.0"
