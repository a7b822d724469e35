import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

__all__ = (
    "Job",
    "JobRunner",
    "STATUS_PENDING",
    "STATUS_COMPLETED",
    "STATUS_ERRORED",
)

logger = logging.getLogger(__name__)

STATUS_PENDING = "pending"
STATUS_COMPLETED = "completed"
STATUS_ERRORED = "errored"


@dataclass
class Job:
    """
    One unit of work (a replicate fit, a bootstrap refit) and what came out of it.
    """

    name: str
    func: object
    kwargs: dict = field(default_factory=dict)
    status: str = STATUS_PENDING
    data: dict = field(default_factory=dict)

    @property
    def result(self):
        return self.data.get("result")

    @property
    def error(self) -> str | None:
        return self.data.get("error")

    @property
    def ok(self) -> bool:
        return self.status == STATUS_COMPLETED


def _run_job(func, kwargs) -> tuple[str, dict]:
    """
    Run a job, capturing any exception into the job data instead of propagating it.
    """
    try:
        return STATUS_COMPLETED, {"result": func(**kwargs)}
    except Exception as e:  # pylint: disable=broad-except
        logger.exception(e)
        return STATUS_ERRORED, {"error": f"{e.__class__.__name__}: {e}"}


class JobRunner:
    """
    Collects jobs and runs them inline or on a process pool; results come back in enqueue order.
    """

    def __init__(self, workers: int = 1):
        self.workers = max(1, int(workers or 1))
        self.jobs: list[Job] = []

    def enqueue(self, func, name: str | None = None, **kwargs) -> Job:
        """
        Queue func(**kwargs); func must be a module-level callable when running on a pool.
        """
        job = Job(name=name or func.__name__, func=func, kwargs=kwargs)
        logger.debug(f"Enqueuing job {job.name}")
        self.jobs.append(job)
        return job

    def run(self) -> list[Job]:
        pending = [job for job in self.jobs if job.status == STATUS_PENDING]
        logger.info(f"Running {len(pending)} jobs on {self.workers} worker(s)")

        if self.workers == 1 or len(pending) <= 1:
            outcomes = [_run_job(job.func, job.kwargs) for job in pending]
        else:
            with ProcessPoolExecutor(max_workers=self.workers) as executor:
                futures = [executor.submit(_run_job, job.func, job.kwargs) for job in pending]
                outcomes = [future.result() for future in futures]

        for job, (status, data) in zip(pending, outcomes):
            job.status = status
            job.data = {"params": job.kwargs, **data}

        failed = sum(not job.ok for job in pending)
        if failed:
            logger.warning(f"{failed} of {len(pending)} jobs errored")

        return self.jobs
