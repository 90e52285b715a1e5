from .solution_audit import AuditResult, audit_solution

__all__ = [
    'AuditResult',
    'audit_solution',
]
