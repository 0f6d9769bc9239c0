import logging
import signal
import threading


class GracefulKiller():
    """
    Informant about reception of termination signals

    The training loop polls `kill_now` between update rounds. Signal handlers
    can only be installed from the main thread; elsewhere the killer only
    listens to `request_stop`.
    """

    kill_now = False

    def __init__(self, name):
        self.logger = logging.getLogger(__name__).getChild(name)
        if threading.current_thread() is threading.main_thread():
            self.logger.debug("Creating kill signal listeners.")
            signal.signal(signal.SIGTERM, self.exit_gracefully)
            signal.signal(signal.SIGINT, self.exit_gracefully)
        else:
            self.logger.debug("Not in main thread. No signal listeners.")

    def exit_gracefully(self, signum, frame):
        self.logger.info("Received termination signal {}.".format(signum))
        self.kill_now = True

    def request_stop(self):
        self.logger.info("Stop requested.")
        self.kill_now = True
