class YdException(Exception):
    extraData = {}
    code = None

    def __init__(self, message, extraData=None, code=None):
        super().__init__(message)
        if extraData is not None:
            self.extraData = extraData
        if code is not None:
            self.code = code


class AnnotationError(YdException):
    code = "malformed"

    @property
    def line(self):
        return self.extraData.get("line")


class GeometryError(YdException):
    code = "degenerate-box"


class DatasetError(YdException):
    code = "dataset"


class ConfigError(YdException):
    code = "config"


class EvaluationError(YdException):
    code = "evaluation"

    @property
    def line(self):
        return self.extraData.get("line")
