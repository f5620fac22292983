import logging

from core.settings import get_settings


class BaseLab:
    """
    A simple base class for this project's labs.
    """

    def __init__(self, name: str, threads: int | None = None) -> None:
        self._log = logging.getLogger(name=name)
        self.threads = threads if threads is not None else get_settings().threads
        if self.threads < 1:
            raise ValueError('A lab needs at least one worker thread.')
        self._log.debug(f'Initialized with {self.threads} thread(s)')
