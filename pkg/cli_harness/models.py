from django.db import models


class EvaluationRun(models.Model):
    """
    Provenance of one harness command: the resolved configuration, the
    hashes of every file it read or wrote, and the metrics it produced.
    """
    command = models.CharField(max_length=32)
    config = models.JSONField(default=dict)
    config_hash = models.CharField(max_length=64, db_index=True)
    checkpoint_hashes = models.JSONField(default=dict, blank=True)
    dataset_hashes = models.JSONField(default=dict, blank=True)
    metrics = models.JSONField(default=dict, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"EvaluationRun({self.command}, {self.config_hash[:12]})"
