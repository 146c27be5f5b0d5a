from invoke import Collection, task

ns = Collection()


@ns.add_task
@task
def test(c, coverage=False, variants=None, threads=1):
    """Runs the test suite

    --variants restricts the operator routes (comma separated, e.g. spectral,semigroup)
    --threads sets FRACSEM_THREADS for the worker pool
    """
    coverage = "--cov=fracsem --cov-report=term-missing" if coverage else ""
    env = {"FRACSEM_THREADS": str(threads)}
    if variants is not None:
        env["TEST_VARIANTS"] = variants
    c.run(f"pytest {coverage}", env=env)


@ns.add_task
@task
def selftest(c, out="selftest-out"):
    c.run(f"python -m fracsem selftest --out {out}")


@ns.add_task
@task
def refresh_requirements_txt(c, upgrade=False, package=None):
    """Refresh requirements.txt and requirements-dev.txt using pip-tools

    --upgrade will upgrade all packages to latest version
    --package will upgrade a single package
    """
    upgrade = "--upgrade" if upgrade else ""
    package = f"-P {package}" if package is not None else ""
    c.run(f"pip-compile {upgrade} {package} requirements.in")
    c.run(f"pip-compile {upgrade} {package} requirements-dev.in")


@ns.add_task
@task
def docs(c, serve=True, clean=True):
    serve = "serve" if serve else ""
    clean = "clean" if clean else ""
    c.run(f"scripts/build-docs.sh {clean} {serve}")
