import jax

jax.config.update("jax_enable_x64", True)

from climact.SVI.svi import SVI, fit
from climact.model.sampler import forward_sample, sample_dataset
from climact.data.ingestion import load_dataset, save_dataset
