class ToolkitError(Exception):
    """Base error for the numerical library. `code` is a stable machine-readable tag."""

    def __init__(self, code: str, detail: str):
        self.code = code
        self.detail = detail
        super().__init__(f"{code}: {detail}")


class InvalidArgumentError(ToolkitError):
    def __init__(self, detail: str):
        super().__init__("INVALID_ARGUMENT", detail)


class DimensionMismatchError(ToolkitError):
    def __init__(self, left: int, right: int):
        super().__init__("DIMENSION_MISMATCH", f"n={left} does not match n={right}")


class EmptyMeasureError(ToolkitError):
    def __init__(self, detail: str = "no atoms in the region"):
        super().__init__("EMPTY_MEASURE", detail)


class UnsupportedModelError(ToolkitError):
    def __init__(self, detail: str):
        super().__init__("UNSUPPORTED_MODEL", detail)


class RadiusOutOfRangeError(ToolkitError):
    def __init__(self, radius: float, detail: str = ""):
        self.radius = radius
        message = f"radius {radius:g} leaves the certified range"
        super().__init__("RADIUS_OUT_OF_RANGE", f"{message}; {detail}" if detail else message)


class IllConditionedError(ToolkitError):
    def __init__(self, detail: str):
        super().__init__("ILL_CONDITIONED", detail)


class CertificationError(ToolkitError):
    def __init__(self, constant: float, limit: float):
        self.constant = constant
        self.limit = limit
        super().__init__(
            "CERTIFICATION_FAILED",
            f"grid Hoelder-1/2 constant {constant:.6g} exceeds {limit:.6g}",
        )


class InternalError(ToolkitError):
    def __init__(self, detail: str):
        super().__init__("INTERNAL_ERROR", detail)
