"""
Checking gradients against finite differences
=============================================

The model is trained with hand-written reverse-mode gradients. Here they
are compared with central differences on small random instances.
"""

from kes.gradcheck import check_gradients, run_gradcheck, tiny_instance

params, example = tiny_instance(seed=0, dim=4)
for name, err in sorted(check_gradients(params, example).items()):
    print(f"{name:28s} {err:.2e}")

# the same check over twenty random models, as run by `kes gradcheck`
report = run_gradcheck(num_models=20)
print("max relative error:", report["max_rel_error"])
