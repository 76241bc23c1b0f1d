"""File formats, instance generators and the command-line front end."""

from flowsched.harness.generate import FAMILIES, GeneratorConfig, generate
from flowsched.harness.io import dumps_instance, instance_from_dict, instance_to_dict, load_instance, save_instance

__all__ = [
    "FAMILIES",
    "GeneratorConfig",
    "dumps_instance",
    "generate",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "save_instance",
]
