import json, os
from enum import Enum


class Status(Enum):
    NAMED_FAILURE = "Named Failure"
    UNNAMED_FAILURE = "Unnamed Failure"
    STARTED = "Started"
    PROFILE = "Tabulating Profile"
    SURFACE = "Building Surface"
    OPERATOR = "Assembling Jacobi Operator"
    REDUCTION = "Solving Reduction"
    MATCHING = "Matching Neck Size"
    CERTIFY = "Certifying Embedding"
    EXPORT = "Exporting Mesh"
    REPORT = "Writing Report"
    COMPLETED = "Completed"


status_progress_dict = {
    Status.NAMED_FAILURE: 0,
    Status.UNNAMED_FAILURE: 0,
    Status.STARTED: 0,
    Status.PROFILE: 10,
    Status.SURFACE: 20,
    Status.OPERATOR: 30,
    Status.REDUCTION: 50,
    Status.MATCHING: 60,
    Status.CERTIFY: 80,
    Status.EXPORT: 90,
    Status.REPORT: 95,
    Status.COMPLETED: 100,
}

FILENAME = "status.json"


class StatusUpdater:

    def __init__(self, directory):
        self.status_file_path = os.path.join(directory, FILENAME)
        self.status = None

    def get_status(self):
        return self.status

    def set_status(self, status, message=""):
        self.status = status
        with open(self.status_file_path, "w") as file:
            json.dump({"status": self.status.value,
                       "progress": status_progress_dict[self.status],
                       "message": message}, file)

    def set_status_named_failure(self, error_message):
        self.set_status(Status.NAMED_FAILURE, error_message)

    def set_status_unnamed_failure(self, error_message):
        self.set_status(Status.UNNAMED_FAILURE, error_message)

    def set_status_started(self):
        self.set_status(Status.STARTED)

    def set_status_completed(self):
        self.set_status(Status.COMPLETED)


class StatusReader:

    def __init__(self, directory):
        self.status_file = open(os.path.join(directory, FILENAME), "r")

    def get_status(self):
        status = json.load(self.status_file)
        status["status"] = Status(status["status"])
        return status

    def close(self):
        self.status_file.close()
