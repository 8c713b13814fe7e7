# -*- coding: utf-8 -*-
import random
import tempfile
from io import StringIO
from pathlib import Path

from django.core.exceptions import ValidationError
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from apps.textnorm.services.normalization import (
    DEFAULT_INVISIBLE_CHARSET,
    EmoticonDictionary,
    NormalizationConfig,
    canonicalize_emoticons,
    clean,
    clean_lines,
    configured_emoticons_path,
    default_config,
    load_emoticon_dictionary,
    lowercase,
    normalize_encoding,
    strip_invisible,
)

# Morceaux utilisés pour fabriquer des commentaires aléatoires
FUZZ_PIECES = [
    'a', 'b', 'c', 'd', 'đ', 'Đ', 'e', 'g', 'h', 'i', 'k', 'l', 'm', 'n', 'o', 'p', 'q',
    't', 'u', 'v', 'x', 'y', 'A', 'T', 'O', 'U', 'Y', 'D', 'ă', 'â', 'ê', 'ô', 'ơ', 'ư',
    'Ư', 'á', 'ờ', 'ẽ', 'ỉ', 'ụ', 'ữ', '0', '3', '9', 'İ', 'ǅ', 'ẞ', '\u0345',
    ':', '(', ')', '=', '[', ']', '-', '_', '^', '<', '>', "'", ';', '.', '!', '?', ',', '*', '|',
    ' ', ' ', '  ', '\t',
    '\u200b', '\u200c', '\u200d', '\ufeff', '\u00ad', '\x01', '\x1b', '\x7f', '\x9f',
    '\u0301', '\u0300', '\u0303', '\u0309', '\u0323', '\u0302', '\u0306', '\u031b',
    '🙂', '😀', '❤',
    'thíêt', 'kê\u0301', 'nhổn', 'làm', 'gắt', 'vl', 'qua', 'gia', 'hoà', 'thuý', 'khuya',
    'người', 'xD', ':v', 'T_T', ':))', ':D', '<3', '^_^', ':-(',
]


def random_comment(rng: random.Random) -> str:
    return ''.join(rng.choice(FUZZ_PIECES) for _ in range(rng.randint(0, 14)))


class NormalizeEncodingTests(SimpleTestCase):

    def test_reference_example(self):
        self.assertEqual(normalize_encoding('thíêt kê\u0301'), 'thiết kế')

    def test_empty(self):
        self.assertEqual(normalize_encoding(''), '')

    def test_decomposed_acute_is_composed(self):
        self.assertEqual(normalize_encoding('e\u0301'), 'é')

    def test_tone_moves_to_marked_vowel(self):
        self.assertEqual(normalize_encoding('ngừơi'), 'người')

    def test_modern_tone_placement(self):
        self.assertEqual(normalize_encoding('hòa'), 'hoà')
        self.assertEqual(normalize_encoding('thúy'), 'thuý')
        self.assertEqual(normalize_encoding('hóan'), 'hoán')

    def test_qu_and_gi_glides(self):
        self.assertEqual(normalize_encoding('qúa'), 'quá')
        self.assertEqual(normalize_encoding('gía'), 'giá')

    def test_hidden_characters_do_not_block_composition(self):
        self.assertEqual(
            normalize_encoding('e\u200b\u0301', DEFAULT_INVISIBLE_CHARSET),
            'é\u200b',
        )

    def test_idempotent(self):
        for text in ['thíêt kê\u0301', 'Người', 'hoà bình', 'abc']:
            once = normalize_encoding(text)
            self.assertEqual(normalize_encoding(once), once)


class EmoticonTests(SimpleTestCase):

    def test_single_replacement(self):
        dictionary = EmoticonDictionary.from_mapping({':(': '\U0001F641'})
        self.assertEqual(canonicalize_emoticons('hay :(', dictionary), 'hay \U0001F641')

    def test_empty_dictionary(self):
        self.assertEqual(canonicalize_emoticons('abc', EmoticonDictionary()), 'abc')

    def test_scan_order(self):
        dictionary = EmoticonDictionary.from_mapping({':(': 'X'})
        self.assertEqual(canonicalize_emoticons('::((', dictionary), ':X(')

    def test_longest_match_first(self):
        dictionary = default_config().emoticon_dict
        self.assertEqual(canonicalize_emoticons('vui :))', dictionary), 'vui 😄')
        self.assertEqual(canonicalize_emoticons('vui :)', dictionary), 'vui 🙂')

    def test_case_insensitive_keys(self):
        dictionary = default_config().emoticon_dict
        self.assertEqual(canonicalize_emoticons(':d', dictionary), '😀')
        self.assertEqual(canonicalize_emoticons('XD', dictionary), '😆')

    def test_letter_keys_do_not_split_words(self):
        dictionary = default_config().emoticon_dict
        self.assertEqual(canonicalize_emoticons('toxDai', dictionary), 'toxDai')
        self.assertEqual(canonicalize_emoticons('haha xD', dictionary), 'haha 😆')

    def test_hidden_characters_inside_key(self):
        dictionary = default_config().emoticon_dict
        self.assertEqual(
            canonicalize_emoticons(':\u200b)', dictionary, DEFAULT_INVISIBLE_CHARSET),
            '🙂',
        )

    def test_one_pass_is_a_fixpoint(self):
        dictionary = default_config().emoticon_dict
        for text in ['::((', ':)):(', '<3<3 ^^', '>:(:(']:
            once = canonicalize_emoticons(text, dictionary)
            self.assertEqual(canonicalize_emoticons(once, dictionary), once)

    def test_invalid_entries_rejected(self):
        with self.assertRaises(ValidationError):
            EmoticonDictionary.from_mapping({':': '🙂'})
        with self.assertRaises(ValidationError):
            EmoticonDictionary.from_mapping({':)': 'ab'})
        with self.assertRaises(ValidationError):
            EmoticonDictionary.from_mapping({':)': ':'})
        with self.assertRaises(ValidationError):
            EmoticonDictionary((('xD', '😆'), ('XD', '😀')))

    def test_bundled_dictionary(self):
        self.assertGreaterEqual(len(default_config().emoticon_dict), 30)

    def test_malformed_file_reports_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'emoticons.tsv'
            path.write_text('# commentaire\n:)\t🙂\n:(\n', encoding='utf-8')
            with self.assertRaises(ValidationError) as ctx:
                load_emoticon_dictionary(path)
        self.assertEqual(ctx.exception.code, 'malformed_line')
        self.assertEqual(ctx.exception.params['line'], 3)


class StripInvisibleTests(SimpleTestCase):

    def setUp(self):
        self.config = NormalizationConfig()

    def test_zero_width_space_removed(self):
        self.assertEqual(strip_invisible('a\u200bb', self.config), 'ab')

    def test_nothing_to_remove(self):
        self.assertEqual(strip_invisible('ab', self.config), 'ab')

    def test_punctuation_separated(self):
        self.assertEqual(strip_invisible('vl!', self.config), 'vl !')
        self.assertEqual(strip_invisible('hay🙂quá', self.config), 'hay 🙂 quá')

    def test_punctuation_kept_attached(self):
        config = NormalizationConfig(separate_punct=False)
        self.assertEqual(strip_invisible('vl!', config), 'vl!')

    def test_no_double_spaces(self):
        self.assertEqual(strip_invisible('a \u200b b  !', self.config), 'a b !')

    def test_output_has_no_invisible_character(self):
        text = 'x\x01y\ufeffz\u00ad\u200d'
        result = strip_invisible(text, self.config)
        self.assertFalse(set(result) & DEFAULT_INVISIBLE_CHARSET)

    def test_charset_rejects_letters_and_whitespace(self):
        with self.assertRaises(ValidationError):
            NormalizationConfig(invisible_charset=frozenset({'a'}))
        with self.assertRaises(ValidationError):
            NormalizationConfig(invisible_charset=frozenset({' '}))


class CleanTests(SimpleTestCase):

    def test_lowercase(self):
        self.assertEqual(lowercase('ABC'), 'abc')
        self.assertEqual(lowercase('Đẹp'), 'đẹp')
        self.assertEqual(lowercase('đẹp'), 'đẹp')

    def test_reference_example(self):
        self.assertEqual(clean('Thíêt Kê\u0301'), 'thiết kế')

    def test_empty(self):
        self.assertEqual(clean(''), '')

    def test_step_order(self):
        config = default_config()
        text = 'Đẹp Qúa:D\u200b!!'
        expected = lowercase(strip_invisible(
            canonicalize_emoticons(
                normalize_encoding(text, config.invisible_charset),
                config.emoticon_dict,
                config.invisible_charset,
            ),
            config,
        ))
        self.assertEqual(clean(text, config), expected)
        self.assertEqual(expected, 'đẹp quá 😀!!')

    def test_case_insensitive(self):
        for text in ['Thiết kế ĐẸP quá :D', 'nhổn làm gắt VL', 'người Hoà']:
            self.assertEqual(clean(text.upper()), clean(text.lower()))

    def test_idempotent_on_fuzzed_comments(self):
        rng = random.Random(2019)
        config = default_config()
        for _ in range(10000):
            text = random_comment(rng)
            once = clean(text, config)
            self.assertEqual(clean(once, config), once, msg=repr(text))

    def test_idempotent_on_special_capitals(self):
        for text in ['ôİ̃', 'toİ̃', 'İ', 'ǅa', 'ẞ', 'áͅ', 'THÍÊT İ']:
            once = clean(text)
            self.assertEqual(clean(once), once, msg=repr(text))

    def test_lowercase_is_recomposed(self):
        for text in ['İ', 'ôİ̃', 'ǅ', 'ẞ']:
            result = lowercase(text)
            self.assertEqual(normalize_encoding(result), result)
        self.assertEqual(lowercase('ẞ'), 'ß')
        self.assertEqual(lowercase('ǅ'), 'ǆ')

    def test_clean_lines(self):
        self.assertEqual(clean_lines(['Vl!\n', 'HAY :(\n']), ['vl !', 'hay 🙁'])


class CleanCommandTests(SimpleTestCase):

    def test_clean_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / 'raw.txt'
            target = Path(tmp) / 'clean.txt'
            source.write_text('Thíêt Kê\u0301\nHay:(\n', encoding='utf-8')
            call_command('clean', str(source), out=str(target), stdout=StringIO())
            self.assertEqual(target.read_text(encoding='utf-8'), 'thiết kế\nhay 🙁\n')

    def test_no_separate_punct(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / 'raw.txt'
            target = Path(tmp) / 'clean.txt'
            source.write_text('vl!\n', encoding='utf-8')
            call_command(
                'clean', str(source), out=str(target), no_separate_punct=True, stdout=StringIO()
            )
            self.assertEqual(target.read_text(encoding='utf-8'), 'vl!\n')

    def test_malformed_dictionary_is_a_command_error(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / 'raw.txt'
            emoticons = Path(tmp) / 'bad.tsv'
            source.write_text('abc\n', encoding='utf-8')
            emoticons.write_text('oops\n', encoding='utf-8')
            with self.assertRaises(CommandError):
                call_command('clean', str(source), emoticons=str(emoticons), stdout=StringIO())

    def test_dictionary_from_setting(self):
        with tempfile.TemporaryDirectory() as tmp:
            source = Path(tmp) / 'raw.txt'
            target = Path(tmp) / 'clean.txt'
            emoticons = Path(tmp) / 'emoticons.tsv'
            source.write_text('Hay:(\n', encoding='utf-8')
            emoticons.write_text(':(\t💢\n', encoding='utf-8')
            with override_settings(HSD_EMOTICONS_PATH=str(emoticons)):
                self.assertEqual(configured_emoticons_path(), emoticons)
                self.assertEqual(configured_emoticons_path('autre.tsv'), Path('autre.tsv'))
                call_command('clean', str(source), out=str(target), stdout=StringIO())
            self.assertEqual(target.read_text(encoding='utf-8'), 'hay 💢\n')

    @override_settings(HSD_EMOTICONS_PATH='')
    def test_empty_setting_means_bundled_dictionary(self):
        self.assertIsNone(configured_emoticons_path())
