class ExperimentError(Exception):
    def __init__(self, exit_code: int, detail: str):
        self.exit_code = exit_code
        self.detail = detail
        super().__init__(self.detail)


class ConfigError(ExperimentError):
    def __init__(self, detail: str):
        super().__init__(2, detail)


class BudgetExhaustedError(ExperimentError):
    def __init__(self, used: int, budget: int):
        self.used = used
        self.budget = budget
        super().__init__(1, f"BUDGET_EXHAUSTED: {used} draws requested, budget {budget}")
