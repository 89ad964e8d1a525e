"""Text-driven 3D human motion editing with a source- and text-conditioned diffusion model."""

__version__ = "0.1.0"
