from .instance_generator import GeneratorConfig, generate_instance

__all__ = [
    'GeneratorConfig',
    'generate_instance',
]
