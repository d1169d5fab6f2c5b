import json
import math
import tempfile
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase

from cli_harness.exceptions import ConfigurationError, HorizonTooLong, ReportWriteError
from cli_harness.models import EvaluationRun
from cli_harness.utils.evaluation import control_setup, eval_control, eval_prediction
from cli_harness.utils.metrics import METRIC_COLUMNS, MetricsReport, compute_metrics
from cli_harness.utils.report import emit_report
from cli_harness.utils.run_config import deep_merge, load_run_config
from dynamics_models.utils.nominal import NominalEngine
from dynamics_models.utils.rollout import PhysicsModel
from neural.utils.checkpoint import file_sha256
from planner.utils.goals import EASY, HARD
from planner.utils.search import PlannerConfig
from scenario.utils.generation import generate_dataset
from scenario.utils.specs import MATCHED, POSITION_CONTROL, SURROGATE
from sim_core.constants import SURFACE_SPATIAL_FIELD
from sim_core.utils.state import SimConfig

SIM = SimConfig()
QUICK_PLANNER = PlannerConfig(horizon_near=1, horizon_far=1, max_episode_actions=1)
CONTROL = {'masses': [0.9, 1.0], 'radii': [0.054, 0.059], 'mu': 0.15, 'n_easy': 1, 'n_hard': 1}


def pose_array(rows):
    return np.array(rows, dtype=float).reshape(1, -1, 3)


def write_config(directory, document):
    path = Path(directory) / 'run.json'
    path.write_text(json.dumps(document), encoding='utf-8')
    return str(path)


class MetricsTests(SimpleTestCase):

    def test_perfect_prediction(self):
        truth = pose_array([[0.1, 0.0, 0.2], [0.3, 0.1, -0.4]])
        initial = pose_array([[0.0, 0.0, 0.0], [0.2, 0.1, 0.0]])
        report = compute_metrics(truth, truth, initial)
        for row in report.objects:
            self.assertEqual((row.trans_pct, row.pos_mm, row.rot_deg), (0.0, 0.0, 0.0))

    def test_trans_percentage(self):
        initial = pose_array([[0.0, 0.0, 0.0]])
        truth = pose_array([[0.1, 0.0, 0.0]])
        pred = pose_array([[0.1, 0.005, 0.0]])
        row = compute_metrics(pred, truth, initial).objects[0]
        self.assertAlmostEqual(row.pos_mm, 5.0, places=9)
        self.assertAlmostEqual(row.trans_pct, 5.0, places=9)

    def test_rotation_wraps_to_half_turn(self):
        truth = pose_array([[0.0, 0.0, 0.0]])
        pred = pose_array([[0.0, 0.0, math.pi]])
        self.assertAlmostEqual(compute_metrics(pred, truth, truth).objects[0].rot_deg, 180.0)
        pred = pose_array([[0.0, 0.0, 2 * math.pi - 0.1]])
        self.assertAlmostEqual(compute_metrics(pred, truth, truth).objects[0].rot_deg, math.degrees(0.1))

    def test_unmoved_object_left_out_of_trans(self):
        initial = np.zeros((2, 1, 3))
        truth = np.array([[[0.1, 0.0, 0.0]], [[0.0, 0.0, 0.0]]])
        pred = truth + np.array([0.002, 0.0, 0.0])
        row = compute_metrics(pred, truth, initial).objects[0]
        self.assertEqual(row.n_trans, 1)
        self.assertAlmostEqual(row.trans_pct, 2.0)
        self.assertAlmostEqual(row.pos_mm, 2.0)

    def test_no_moved_object_reports_missing_trans(self):
        still = np.zeros((1, 1, 3))
        report = compute_metrics(still + 0.001, still, still, model='IN')
        self.assertTrue(math.isnan(report.objects[0].trans_pct))
        self.assertIsNone(report.to_dict()['objects'][0]['trans_pct'])
        self.assertTrue(math.isnan(MetricsReport.from_dict(report.to_dict()).objects[0].trans_pct))

    def test_one_row_per_object(self):
        rng = np.random.default_rng(0)
        poses = rng.normal(size=(3, 3, 3, 3))
        report = compute_metrics(poses[0], poses[1], poses[2], model='SAIN')
        frame = report.to_frame()
        self.assertEqual(list(frame.columns), METRIC_COLUMNS)
        self.assertEqual(list(frame['object']), [1, 2, 3])
        self.assertTrue((frame[['trans_pct', 'pos_mm', 'rot_deg']] >= 0).all().all())

    def test_shape_mismatch(self):
        with self.assertRaises(ValueError):
            compute_metrics(np.zeros((1, 2, 3)), np.zeros((1, 3, 3)), np.zeros((1, 2, 3)))


class RunConfigTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_defaults_from_settings(self):
        run = load_run_config('train', out_dir=self.tmp.name)
        self.assertEqual(run.planner_config(), PlannerConfig())
        self.assertEqual(run.sim(), SimConfig(dt=1.0 / 240.0))
        self.assertEqual(run.train_config().error_weight, 1e6)
        self.assertEqual(run.nominal().masses, (0.896, 1.1))

    def test_document_merges_case_insensitively(self):
        path = write_config(self.tmp.name, {'train': {'iterations': 7}, 'Planner': {'horizon_far': 1}})
        run = load_run_config('train', config_path=path, out_dir=self.tmp.name)
        self.assertEqual(run.train_config().iterations, 7)
        self.assertEqual(run.train_config().batch_size, 100)
        self.assertEqual(run.planner_config().horizon_far, 1)

    def test_unknown_keys_rejected(self):
        for document in ({'trainer': {}}, {'train': {'epochs': 3}}, {'scenario': {'n_pushers': 2}}):
            path = write_config(self.tmp.name, document)
            with self.assertRaises(ConfigurationError):
                load_run_config('train', config_path=path)

    def test_invalid_value_rejected(self):
        path = write_config(self.tmp.name, {'planner': {'horizon_near': 0}})
        with self.assertRaises(ConfigurationError):
            load_run_config('eval_control', config_path=path)

    def test_flag_overrides_document(self):
        path = write_config(self.tmp.name, {'seed': 4, 'threads': 2})
        run = load_run_config('gen_data', config_path=path, seed=9)
        self.assertEqual(run.seed, 9)
        self.assertEqual(run.threads, 2)
        self.assertEqual(run.train_config().seed, 9)

    def test_scenario_split(self):
        path = write_config(self.tmp.name, {'scenario': {'push_duration': 1.0, 'n_disks': 3, 'shadow_window': 50}})
        run = load_run_config('gen_data', config_path=path)
        self.assertEqual(run.push_spec(POSITION_CONTROL).duration, 1.0)
        self.assertEqual(run.scene_spec().n_disks, 3)
        self.assertEqual(run.scene_spec(2).n_disks, 2)
        self.assertEqual(run.generation()['shadow_window'], 50)

    def test_config_hash(self):
        first = load_run_config('eval_pred', seed=1, out_dir=self.tmp.name)
        again = load_run_config('eval_pred', seed=1, out_dir=self.tmp.name)
        other = load_run_config('eval_pred', seed=2, out_dir=self.tmp.name)
        self.assertEqual(first.config_hash(), again.config_hash())
        self.assertNotEqual(first.config_hash(), other.config_hash())

    def test_missing_reference(self):
        path = write_config(self.tmp.name, {'datasets': {'test': str(Path(self.tmp.name) / 'absent.jsonl')}})
        run = load_run_config('eval_pred', config_path=path)
        with self.assertRaises(ConfigurationError):
            run.resolve('test', 'dataset')

    def test_deep_merge_keeps_base(self):
        base = {'A': {'x': 1, 'y': 2}}
        merged = deep_merge(base, {'A': {'x': 5}})
        self.assertEqual(merged, {'A': {'x': 5, 'y': 2}})
        self.assertEqual(base, {'A': {'x': 1, 'y': 2}})


class EvaluationTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = generate_dataset(3, POSITION_CONTROL, seed=11, sim=SIM, shadow_window=0)

    def test_physics_self_consistency(self):
        report = eval_prediction(PhysicsModel(sim=SIM), self.dataset, horizon=200)
        for row in report.objects:
            self.assertLess(row.pos_mm, 0.01)
            self.assertEqual(row.n_trajectories, 3)

    def test_nominal_physics_row(self):
        report = eval_prediction(PhysicsModel(nominal=NominalEngine(sim=SIM)), self.dataset, horizon=200)
        self.assertEqual(report.model, 'physics')
        self.assertEqual(len(report.objects), 2)

    def test_threads_do_not_change_report(self):
        model = PhysicsModel(nominal=NominalEngine(sim=SIM))
        serial = eval_prediction(model, self.dataset, horizon=100)
        threaded = eval_prediction(model, self.dataset, horizon=100, threads=3)
        self.assertEqual(serial.to_dict(), threaded.to_dict())

    def test_horizon_too_long(self):
        with self.assertRaises(HorizonTooLong) as ctx:
            eval_prediction(PhysicsModel(sim=SIM), self.dataset, horizon=10_000)
        self.assertEqual(ctx.exception.available, self.dataset.records[0].trajectory.n_steps)

    def test_control_episodes_in_order(self):
        setup = control_setup(CONTROL, SIM)
        report = eval_control(PhysicsModel(sim=SIM), setup, QUICK_PLANNER, n_easy=1, n_hard=1, seed=2)
        self.assertEqual([e.difficulty for e in report.episodes], [EASY, HARD])
        self.assertEqual([e.index for e in report.episodes], [0, 1])
        self.assertTrue(all(e.outcome.steps <= 1 for e in report.episodes))
        frame = report.to_frame()
        self.assertEqual(list(frame['difficulty']), [EASY, HARD])
        self.assertEqual(list(frame['episodes']), [1, 1])

    def test_surrogate_setup(self):
        setup = control_setup(CONTROL, SIM, world=SURROGATE, seed=3)
        self.assertEqual(setup.initial.surface.mode, SURFACE_SPATIAL_FIELD)
        self.assertAlmostEqual(setup.sim.contact_mu, SIM.contact_mu * 1.3)
        self.assertGreater(setup.sigma_pos, 0)
        shifted = control_setup(CONTROL, SIM, world=SURROGATE, seed=3, shifted=True)
        self.assertFalse(np.array_equal(shifted.initial.surface.mu_field, setup.initial.surface.mu_field))
        swapped = control_setup(CONTROL, SIM, world=MATCHED, swap=True)
        self.assertEqual(swapped.initial.disks[0].radius, 0.059)

    def test_shift_needs_surrogate(self):
        with self.assertRaises(ValueError):
            control_setup(CONTROL, SIM, world=MATCHED, shifted=True)


class ReportTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.run = load_run_config('eval_pred', out_dir=self.tmp.name)
        truth = pose_array([[0.1, 0.0, 0.0], [0.3, 0.0, 0.0]])
        self.metrics = [compute_metrics(truth + 0.001, truth, np.zeros_like(truth), model='IN', horizon=200)]

    def test_csv_header_and_json_provenance(self):
        emit_report(self.tmp.name, self.run, metrics=self.metrics, checkpoint_hashes={'in.ckpt': 'abc'})
        csv = (Path(self.tmp.name) / 'metrics.csv').read_text()
        self.assertEqual(csv.splitlines()[0], 'model,object,trans_pct,pos_mm,rot_deg')
        self.assertEqual(len(csv.splitlines()), 3)
        payload = json.loads((Path(self.tmp.name) / 'metrics.json').read_text())
        self.assertEqual(payload['config'], self.run.to_dict())
        self.assertEqual(payload['config_hash'], self.run.config_hash())
        self.assertEqual(payload['checkpoints'], {'in.ckpt': 'abc'})

    def test_episode_plots_and_control_tables(self):
        setup = control_setup(CONTROL, SIM)
        control = eval_control(PhysicsModel(sim=SIM), setup, QUICK_PLANNER, n_easy=1, n_hard=1, seed=0)
        written = emit_report(self.tmp.name, self.run, control=control)
        names = sorted(p.relative_to(self.tmp.name).as_posix() for p in written)
        self.assertEqual(names, ['control.csv', 'control.json', 'episodes/episode_0_easy.svg',
                                 'episodes/episode_1_hard.svg'])
        first = (Path(self.tmp.name) / 'episodes/episode_0_easy.svg').read_bytes()
        emit_report(self.tmp.name, self.run, control=control)
        self.assertEqual((Path(self.tmp.name) / 'episodes/episode_0_easy.svg').read_bytes(), first)

    def test_loss_curve_plot(self):
        curves = {'SAIN': {'loss_curve': [[0, 1e-3, 2e-3], [10, 5e-4, None]], 'fine_tune_curve': [[0, 4e-4, 4e-4]]}}
        written = emit_report(self.tmp.name, self.run, curves=curves)
        self.assertEqual([p.name for p in written], ['loss_curve_SAIN.svg'])

    def test_write_failure_names_path(self):
        blocker = Path(self.tmp.name) / 'blocker'
        blocker.write_text('not a directory')
        with self.assertRaises(ReportWriteError) as ctx:
            emit_report(blocker, self.run, metrics=self.metrics)
        self.assertEqual(Path(ctx.exception.path).parent, blocker)


class CommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.out = Path(self.tmp.name)
        self.config = write_config(self.tmp.name, {
            'train': {'iterations': 3, 'batch_size': 8, 'rollout_length': 50, 'log_every': 1, 'decay_every': 2,
                      'validation_fraction': 0.2},
            'scenario': {'shadow_window': 50},
            'planner': {'horizon_near': 1, 'horizon_far': 1, 'max_episode_actions': 1},
        })

    def command(self, name, /, **options):
        call_command(name, config=self.config, out=str(self.out), stdout=StringIO(), stderr=StringIO(), **options)

    def generate(self):
        self.command('gen_data', n=3, seed=21, name='train')
        return self.out / 'train.jsonl'

    def test_gen_data_records_hash(self):
        path = self.generate()
        self.assertTrue(path.exists())
        run = EvaluationRun.objects.get(command='gen_data')
        self.assertEqual(run.dataset_hashes, {str(path): file_sha256(path)})
        self.assertEqual(run.config['options']['n'], 3)

    def test_train_eval_report_pipeline(self):
        data = self.generate()
        self.command('train', kind='IN', data=str(data), seed=0)
        checkpoint = self.out / 'IN.ckpt'
        self.assertTrue(checkpoint.exists())
        self.assertTrue((self.out / 'loss_curve_IN.svg').exists())

        self.command('eval_pred', data=str(data), models=[str(checkpoint)], horizon=200)
        csv = (self.out / 'metrics.csv').read_text()
        first_json = (self.out / 'metrics.json').read_bytes()
        lines = csv.splitlines()
        self.assertEqual(lines[0], 'model,object,trans_pct,pos_mm,rot_deg')
        self.assertEqual([line.split(',')[0] for line in lines[1:]], ['physics', 'physics', 'IN', 'IN'])

        self.command('eval_pred', data=str(data), models=[str(checkpoint)], horizon=200)
        self.assertEqual((self.out / 'metrics.csv').read_text(), csv)
        self.assertEqual((self.out / 'metrics.json').read_bytes(), first_json)

        run = EvaluationRun.objects.filter(command='eval_pred').first()
        self.assertEqual(run.checkpoint_hashes, {str(checkpoint): file_sha256(checkpoint)})
        (self.out / 'metrics.csv').unlink()
        self.command('report')
        self.assertEqual((self.out / 'metrics.csv').read_text(), csv)

    def test_fine_tune_marks_checkpoint(self):
        data = self.generate()
        self.command('train', kind='SAIN', data=str(data))
        config = json.loads(Path(self.config).read_text())
        config['train'].update({'fine_tune_iterations': 2})
        Path(self.config).write_text(json.dumps(config))
        self.command('fine_tune', model=str(self.out / 'SAIN.ckpt'), data=str(data))
        self.assertTrue((self.out / 'SAIN_finetuned.ckpt').exists())
        run = EvaluationRun.objects.get(command='fine_tune')
        self.assertEqual(len(run.checkpoint_hashes), 2)

    def test_surface_shift_outside_surrogate_world_is_rejected(self):
        with self.assertRaises(CommandError) as caught:
            self.command('gen_data', n=1, seed=21, name='shifted', world='matched', surface_shift=True)
        self.assertIn('--surface-shift', str(caught.exception))
        self.assertFalse((self.out / 'shifted.jsonl').exists())
        self.assertFalse(EvaluationRun.objects.exists())

    def test_training_is_single_threaded(self):
        with self.assertRaises(CommandError):
            self.command('train', kind='IN', data='anything', threads=2)

    def test_missing_dataset(self):
        with self.assertRaises(CommandError):
            self.command('train', kind='IN', data=str(self.out / 'absent.jsonl'))
        self.assertFalse(EvaluationRun.objects.exists())

    def test_horizon_too_long_is_command_error(self):
        data = self.generate()
        with self.assertRaises(CommandError):
            self.command('eval_pred', data=str(data), models=[], horizon=5000)

    def test_eval_control_physics(self):
        self.command('eval_control', n_easy=1, n_hard=1, seed=3)
        self.assertTrue((self.out / 'episodes' / 'episode_0_easy.svg').exists())
        self.assertTrue((self.out / 'episodes' / 'episode_1_hard.svg').exists())
        summary = (self.out / 'control.csv').read_text().splitlines()
        self.assertEqual(summary[0], 'model,world,variant,difficulty,episodes,successes,success_pct')
        self.assertEqual(len(summary), 3)
        run = EvaluationRun.objects.get(command='eval_control')
        self.assertEqual(len(run.metrics['control']), 2)

    def test_report_without_runs(self):
        with self.assertRaises(CommandError):
            self.command('report')
