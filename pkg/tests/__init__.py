from environs import Env

env = Env()

TEST_VARIANTS = env.list("TEST_VARIANTS", ["spectral", "semigroup", "pointwise"])
