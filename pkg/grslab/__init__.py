"""grslab: weighted operators and stability checks for gradient Ricci shrinkers."""
import jax

# every identity tolerance assumes double precision
jax.config.update("jax_enable_x64", True)

__version__ = "1.0.0"
