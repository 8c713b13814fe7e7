# -*- coding: utf-8 -*-
import random
import tempfile
import warnings
from io import StringIO
from pathlib import Path

import numpy as np
from django.core.exceptions import ImproperlyConfigured, ValidationError
from django.core.management import call_command
from django.test import SimpleTestCase

from apps.embeddings.services.bpe import (
    BpeMergeTable,
    apply_bpe_word,
    learn_bpe,
    load_merges,
    save_merges,
)
from apps.embeddings.services.cbow import CbowSettings, initial_cbow_vectors, train_cbow
from apps.embeddings.services.featurizers import (
    EmbeddingProvider,
    EmbeddingSpec,
    InputKind,
    build_featurizer,
    load_featurizer,
)
from apps.embeddings.services.mlm import MlmSettings, SentenceEncoder, train_mlm_encoder
from apps.embeddings.services.tokenizers import (
    Lexicon,
    TokenizerKind,
    TokenizerResources,
    load_lexicon,
    segment,
    tokenize,
)
from apps.embeddings.services.vectors import (
    EmbeddingMatrix,
    embed_sequence,
    load_pretrained,
    save_word2vec,
)
from apps.embeddings.services.vocabulary import (
    MASK_TOKEN,
    PAD_TOKEN,
    SPECIAL_TOKENS,
    UNK_TOKEN,
    Vocabulary,
    build_vocab,
)


def write_text(directory: str, name: str, content: str) -> Path:
    path = Path(directory) / name
    path.write_text(content, encoding='utf-8')
    return path


class VocabularyTests(SimpleTestCase):

    def test_frequency_order(self):
        vocab = build_vocab(['a a b'], min_count=1)
        self.assertEqual(vocab.tokens, [PAD_TOKEN, UNK_TOKEN, MASK_TOKEN, 'a', 'b'])

    def test_min_count(self):
        vocab = build_vocab(['a a b'], min_count=2)
        self.assertEqual(vocab.tokens, [PAD_TOKEN, UNK_TOKEN, MASK_TOKEN, 'a'])

    def test_empty_corpus(self):
        self.assertEqual(build_vocab([], min_count=1).tokens, list(SPECIAL_TOKENS))

    def test_ties_are_lexicographic(self):
        self.assertEqual(build_vocab([['b', 'c', 'a']]).regular_tokens, ['a', 'b', 'c'])

    def test_bijection(self):
        vocab = build_vocab(['nhổn làm gắt vl', 'làm vl quá'])
        for token in vocab.tokens:
            self.assertEqual(vocab.token(vocab.index(token)), token)
        self.assertEqual(vocab.index('inconnu'), 1)

    def test_invalid_min_count(self):
        with self.assertRaises(ValidationError):
            build_vocab(['a'], min_count=0)


class BpeTests(SimpleTestCase):

    def test_most_frequent_pair_first(self):
        self.assertEqual(learn_bpe(['aaab'] * 10, 1).merges, (('a', 'a'),))

    def test_zero_merges(self):
        self.assertEqual(len(learn_bpe(['aaab', 'cd'], 0)), 0)

    def test_tie_break_is_lexicographic(self):
        table = learn_bpe(['ab'] * 5 + ['cd'] * 5, 1)
        self.assertEqual(table.merges, (('a', 'b</w>'),))

    def test_stops_when_no_pair_left(self):
        self.assertEqual(len(learn_bpe(['ab'], 10)), 1)

    def test_empty_corpus(self):
        with self.assertRaises(ValidationError) as ctx:
            learn_bpe([], 3)
        self.assertEqual(ctx.exception.code, 'empty_corpus')
        with self.assertRaises(ValidationError):
            learn_bpe(['   '], 3)

    def test_no_merges_splits_characters(self):
        self.assertEqual(
            tokenize('abc', TokenizerKind.BPE, TokenizerResources(merges=BpeMergeTable())),
            ['a@@', 'b@@', 'c'],
        )

    def test_learned_merges_are_applied(self):
        table = learn_bpe(['aaab'] * 10, 3)
        self.assertEqual(apply_bpe_word('aaab', table), ['aaab'])
        self.assertEqual(apply_bpe_word('b', table), ['b'])

    def test_more_merges_never_more_pieces(self):
        rng = random.Random(7)
        words = [''.join(rng.choice('abcde') for _ in range(rng.randint(1, 7))) for _ in range(200)]
        table = learn_bpe(words, 25)
        for word in words[:50]:
            previous = len(apply_bpe_word(word, table.truncated(0)))
            for n in range(1, len(table) + 1):
                current = len(apply_bpe_word(word, table.truncated(n)))
                self.assertLessEqual(current, previous)
                previous = current

    def test_duplicate_merges_rejected(self):
        with self.assertRaises(ValidationError):
            BpeMergeTable((('a', 'b'), ('a', 'b')))

    def test_merge_file(self):
        table = learn_bpe(['nhổn làm gắt vl'] * 3, 6)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'merges.txt'
            save_merges(table, path)
            self.assertEqual(load_merges(path), table)
            write_text(tmp, 'bad.txt', 'a b\nabc\n')
            with self.assertRaises(ValidationError) as ctx:
                load_merges(Path(tmp) / 'bad.txt')
            self.assertEqual(ctx.exception.params['line'], 2)


class TokenizerTests(SimpleTestCase):

    def test_space(self):
        self.assertEqual(
            tokenize('nhổn làm gắt vl', TokenizerKind.SPACE),
            ['nhổn', 'làm', 'gắt', 'vl'],
        )

    def test_space_round_trip(self):
        for text in ['nhổn làm gắt vl', 'a', '', 'thiết kế đẹp !']:
            self.assertEqual(' '.join(tokenize(text, 'space')), text)

    def test_segmented(self):
        with tempfile.TemporaryDirectory() as tmp:
            lexicon = load_lexicon(write_text(tmp, 'lexicon.txt', 'Thiết Kế\nđẹp\n'))
        self.assertEqual(len(lexicon), 1)
        self.assertEqual(
            tokenize('thiết kế', TokenizerKind.SEGMENTED, TokenizerResources(lexicon=lexicon)),
            ['thiết_kế'],
        )

    def test_segmented_prefers_longest_word(self):
        lexicon = Lexicon(frozenset({('a', 'b'), ('a', 'b', 'c'), ('c', 'd')}))
        self.assertEqual(segment('a b c d', lexicon), ['a_b_c', 'd'])
        self.assertEqual(segment('x a b', lexicon), ['x', 'a_b'])

    def test_missing_resources(self):
        with self.assertRaises(ImproperlyConfigured):
            tokenize('abc', TokenizerKind.BPE)
        with self.assertRaises(ImproperlyConfigured):
            tokenize('abc', TokenizerKind.SEGMENTED, TokenizerResources())


class VectorTests(SimpleTestCase):

    def test_load_pretrained(self):
        with tempfile.TemporaryDirectory() as tmp:
            matrix = load_pretrained(write_text(tmp, 'vec.txt', '2 3\na 1 2 3\nb 4 5 6\n'))
        self.assertEqual(matrix.dim, 3)
        self.assertEqual(matrix.vocab.regular_tokens, ['a', 'b'])
        np.testing.assert_array_equal(matrix.vector('b'), [4, 5, 6])
        np.testing.assert_array_equal(matrix.vector('inconnu'), [0, 0, 0])

    def test_header_dimension(self):
        values = ' '.join(['0.5'] * 300)
        with tempfile.TemporaryDirectory() as tmp:
            matrix = load_pretrained(write_text(tmp, 'vec.txt', f'1 300\nvl {values}\n'))
        self.assertEqual(matrix.dim, 300)

    def test_wrong_arity_reports_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValidationError) as ctx:
                load_pretrained(write_text(tmp, 'vec.txt', '1 2\na 1\n'))
        self.assertEqual(ctx.exception.params['line'], 2)

    def test_count_mismatch(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ValidationError):
                load_pretrained(write_text(tmp, 'vec.txt', '3 2\na 1 2\n'))

    def test_save_then_load_is_exact(self):
        rng = np.random.default_rng(5)
        vocab = Vocabulary(['x', 'y', 'thiết_kế'])
        matrix = EmbeddingMatrix(vocab, rng.normal(size=(len(vocab), 7)).astype(np.float32))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'vec.txt'
            save_word2vec(matrix, path)
            self.assertEqual(load_pretrained(path), matrix)

    def test_non_finite_rejected(self):
        with self.assertRaises(ValidationError):
            EmbeddingMatrix(Vocabulary(['a']), np.full((4, 2), np.nan))

    def test_embed_sequence_padding(self):
        matrix = EmbeddingMatrix(Vocabulary(['a', 'b']), np.arange(10, dtype=np.float32).reshape(5, 2))
        output = embed_sequence(['a', 'b'], matrix, max_len=4)
        np.testing.assert_array_equal(output, [[6, 7], [8, 9], [0, 1], [0, 1]])

    def test_embed_sequence_unknown_and_truncation(self):
        vectors = np.zeros((5, 2), dtype=np.float32)
        vectors[3:] = [[1, 1], [2, 2]]
        matrix = EmbeddingMatrix(Vocabulary(['a', 'b']), vectors)
        np.testing.assert_array_equal(embed_sequence(['zz'], matrix, 2), [[0, 0], [0, 0]])
        output = embed_sequence(['a', 'b', 'a', 'b', 'a', 'b'], matrix, max_len=4)
        np.testing.assert_array_equal(output, [[1, 1], [2, 2], [1, 1], [2, 2]])

    def test_embed_sequence_shape(self):
        matrix = EmbeddingMatrix(Vocabulary(['a']), np.ones((4, 3), dtype=np.float32))
        for length in range(0, 10):
            self.assertEqual(embed_sequence(['a'] * length, matrix, 5).shape, (5, 3))


def similarity_corpus(size: int = 400):
    """'good' et 'great' partagent leurs contextes ; 'zzz' vit ailleurs."""
    rng = random.Random(11)
    shared = ['phim', 'này', 'rất', 'hay', 'quá', 'xem', 'thích', 'vui']
    other = ['mưa', 'lạnh', 'đường', 'xe', 'tắc', 'sáng', 'chiều', 'gió']
    corpus = []
    for index in range(size):
        if index % 3 == 2:
            corpus.append([rng.choice(other), rng.choice(other), 'zzz', rng.choice(other), rng.choice(other)])
        else:
            word = 'good' if index % 3 == 0 else 'great'
            corpus.append([rng.choice(shared), rng.choice(shared), word, rng.choice(shared), rng.choice(shared)])
    return corpus


class CbowTests(SimpleTestCase):

    def test_dimension(self):
        matrix = train_cbow([['a', 'b', 'c', 'd', 'e', 'f']] * 3, CbowSettings(dim=200, epochs=1), seed=1)
        self.assertEqual(matrix.dim, 200)
        self.assertTrue(np.isfinite(matrix.vectors).all())

    def test_zero_epochs_keeps_initialization(self):
        matrix = train_cbow([['a', 'b', 'c']], CbowSettings(dim=8, window=1, epochs=0), seed=3)
        np.testing.assert_array_equal(matrix.vectors, initial_cbow_vectors(matrix.vocab, 8, 3))
        bound = 0.5 / 8
        self.assertTrue((np.abs(matrix.vectors) <= bound).all())

    def test_corpus_smaller_than_window(self):
        with self.assertRaises(ValidationError) as ctx:
            train_cbow([['a', 'b']], CbowSettings(dim=4, window=5))
        self.assertEqual(ctx.exception.code, 'corpus_too_small')

    def test_shared_contexts_give_similar_vectors(self):
        settings = CbowSettings(dim=16, window=2, epochs=40, sample=0)
        matrix = train_cbow(similarity_corpus(), settings, seed=13)
        self.assertGreater(
            matrix.cosine('good', 'great'),
            matrix.cosine('good', 'zzz') + 0.1,
        )
        losses = matrix.metadata['epoch_losses']
        self.assertEqual(len(losses), 40)
        self.assertLess(np.mean(losses[-5:]), np.mean(losses[:5]))

    def test_deterministic(self):
        settings = CbowSettings(dim=8, window=2, epochs=3)
        corpus = similarity_corpus(60)
        self.assertEqual(train_cbow(corpus, settings, seed=2), train_cbow(corpus, settings, seed=2))


def mask_corpus(size: int = 1000):
    """Le jeton 'x' occupe toujours la troisième position."""
    rng = random.Random(3)
    words = [f'w{index}' for index in range(12)]
    return [[rng.choice(words), rng.choice(words), 'x', rng.choice(words)] for _ in range(size)]


class MlmEncoderTests(SimpleTestCase):

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.encoder = train_mlm_encoder(mask_corpus(), MlmSettings(epochs=8), seed=13)

    def test_heldout_loss_decreases(self):
        self.assertLess(self.encoder.final_loss, self.encoder.initial_loss)

    def test_encoding_length(self):
        for sentence in [['w1', 'x'], [], ['inconnu'] * 100, 'w3 w4 x w5']:
            self.assertEqual(self.encoder.encode(sentence).shape, (256,))

    def test_identical_sentences_identical_encodings(self):
        np.testing.assert_array_equal(
            self.encoder.encode(['w1', 'w2', 'x', 'w3']),
            self.encoder.encode(['w1', 'w2', 'x', 'w3']),
        )

    def test_proposals_are_ranked(self):
        proposals = self.encoder.propose_masked(['w0', 'w1', 'x', 'w2'], 2, top_k=5)
        self.assertEqual(len(proposals), 5)
        probabilities = [probability for _, probability in proposals]
        self.assertEqual(probabilities, sorted(probabilities, reverse=True))
        self.assertEqual(proposals[0][0], 'x')
        self.assertFalse({token for token, _ in proposals} & set(SPECIAL_TOKENS))

    def test_top_one(self):
        self.assertEqual(len(self.encoder.propose_masked(['w0', 'w1', 'x', 'w2'], 0, top_k=1)), 1)

    def test_position_out_of_range(self):
        with self.assertRaises(ValidationError) as ctx:
            self.encoder.propose_masked(['w0', 'w1'], 2, top_k=1)
        self.assertEqual(ctx.exception.code, 'position_out_of_range')

    def test_save_and_load(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'encoder.pt'
            self.encoder.save(path)
            loaded = SentenceEncoder.load(path)
        np.testing.assert_allclose(
            loaded.encode(['w1', 'w2', 'x']), self.encoder.encode(['w1', 'w2', 'x']), atol=1e-6
        )
        self.assertEqual(loaded.initial_loss, self.encoder.initial_loss)


class MlmValidationTests(SimpleTestCase):

    def test_heads_must_divide_dim(self):
        with self.assertRaises(ValidationError):
            train_mlm_encoder(mask_corpus(10), MlmSettings(dim=30, heads=4))

    def test_corpus_too_small(self):
        with self.assertRaises(ValidationError) as ctx:
            train_mlm_encoder([['a', 'b']], MlmSettings(dim=16, heads=2, ffn=32))
        self.assertEqual(ctx.exception.code, 'corpus_too_small')

    def test_training_reads_losses_without_grad_warning(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            train_mlm_encoder(mask_corpus(80), MlmSettings(dim=16, heads=2, ffn=32, epochs=1), seed=1)
        self.assertFalse([w for w in caught if 'requires_grad' in str(w.message)])


TEXTS = [
    'nhổn làm gắt vl', 'thiết kế đẹp quá', 'làm ăn gì vl', 'phim hay quá',
    'thiết kế xấu vl', 'đẹp quá trời', 'gắt quá vl', 'hay lắm',
]


class FeaturizerTests(SimpleTestCase):

    def assert_reload_identical(self, featurizer, texts):
        with tempfile.TemporaryDirectory() as tmp:
            featurizer.save(tmp)
            reloaded = load_featurizer(tmp)
        np.testing.assert_allclose(reloaded.featurize(texts).inputs, featurizer.featurize(texts).inputs, atol=1e-6)

    def test_cbow_space(self):
        spec = EmbeddingSpec(name='comment', dim=10, window=2, epochs=2, max_len=6)
        featurizer = build_featurizer(spec, TEXTS, seed=1)
        batch = featurizer.featurize(['nhổn làm gắt vl', '', 'mot hai ba bon nam sau bay'])
        self.assertEqual(batch.inputs.shape, (3, 6, 10))
        self.assertEqual(batch.lengths.tolist(), [4, 1, 6])
        self.assertEqual(featurizer.input_kind, InputKind.SEQUENCE)
        self.assert_reload_identical(featurizer, TEXTS)

    def test_cbow_bpe(self):
        spec = EmbeddingSpec(name='comment_bpe', tokenizer=TokenizerKind.BPE, dim=6, window=2,
                             epochs=1, n_merges=15, max_len=12)
        featurizer = build_featurizer(spec, TEXTS, seed=1)
        self.assertEqual(featurizer.featurize(TEXTS).inputs.shape, (len(TEXTS), 12, 6))
        self.assert_reload_identical(featurizer, TEXTS)

    def test_segmented_and_pretrained(self):
        with tempfile.TemporaryDirectory() as tmp:
            lexicon = write_text(tmp, 'lexicon.txt', 'thiết kế\nlàm ăn\n')
            vectors = write_text(tmp, 'vec.txt', '2 2\nthiết_kế 1 2\nvl 3 4\n')
            spec = EmbeddingSpec(name='fasttext', provider=EmbeddingProvider.PRETRAINED,
                                 tokenizer=TokenizerKind.SEGMENTED, vectors_path=str(vectors),
                                 lexicon_path=str(lexicon), max_len=3)
            featurizer = build_featurizer(spec, TEXTS, seed=1)
        batch = featurizer.featurize(['thiết kế xấu vl'])
        np.testing.assert_array_equal(batch.inputs[0], [[1, 2], [0, 0], [3, 4]])
        self.assert_reload_identical(featurizer, TEXTS)

    def test_segmented_requires_lexicon(self):
        spec = EmbeddingSpec(name='comment_tokenize', tokenizer=TokenizerKind.SEGMENTED)
        with self.assertRaises(ImproperlyConfigured):
            build_featurizer(spec, TEXTS, seed=1)

    def test_sentence_vectors(self):
        spec = EmbeddingSpec(name='roberta', provider=EmbeddingProvider.MLM, dim=16, heads=2,
                             ffn=32, epochs=1, max_len=8)
        featurizer = build_featurizer(spec, TEXTS * 3, seed=1)
        batch = featurizer.featurize(TEXTS)
        self.assertEqual(batch.inputs.shape, (len(TEXTS), 16))
        self.assertEqual(featurizer.input_kind, InputKind.SENTENCE)
        self.assert_reload_identical(featurizer, TEXTS)


class EmbeddingCommandTests(SimpleTestCase):

    def test_learn_bpe_and_tokenize(self):
        with tempfile.TemporaryDirectory() as tmp:
            corpus = write_text(tmp, 'clean.txt', 'aaab\naaab\nab\n')
            merges = Path(tmp) / 'merges.txt'
            tokens = Path(tmp) / 'tokens.txt'
            call_command('learn_bpe', str(corpus), merges=2, out=str(merges), stdout=StringIO())
            self.assertEqual(merges.read_text(encoding='utf-8'), 'a a\na b</w>\n')
            call_command('tokenize', str(corpus), kind='bpe', merges=str(merges),
                         out=str(tokens), stdout=StringIO())
            self.assertEqual(tokens.read_text(encoding='utf-8'), 'aa@@ ab\naa@@ ab\nab\n')

    def test_train_embedding(self):
        with tempfile.TemporaryDirectory() as tmp:
            corpus = write_text(tmp, 'clean.txt', '\n'.join(TEXTS) + '\n')
            call_command('train_embedding', str(corpus), kind='cbow', dim=8, window=2, epochs=1,
                         out=str(Path(tmp) / 'comment'), stdout=StringIO())
            featurizer = load_featurizer(Path(tmp) / 'comment')
        self.assertEqual(featurizer.dim, 8)
        self.assertEqual(featurizer.name, 'comment')
