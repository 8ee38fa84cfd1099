import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "project.settings")
django.setup()


def pytest_sessionstart(session):
    from django.test.utils import setup_test_environment
    from django.test.runner import DiscoverRunner

    setup_test_environment()
    session._django_runner = DiscoverRunner(verbosity=0, interactive=False)
    session._django_old_config = session._django_runner.setup_databases()


def pytest_sessionfinish(session, exitstatus):
    from django.test.utils import teardown_test_environment

    runner = getattr(session, "_django_runner", None)
    if runner is not None:
        runner.teardown_databases(session._django_old_config)
        teardown_test_environment()
