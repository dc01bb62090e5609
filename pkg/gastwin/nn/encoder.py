# -*- coding: utf-8 -*-
"""
Mix Twin encoder: a four-stage hierarchical transformer.

Each stage embeds its input with an overlapping strided convolution, runs a
sequence of attention blocks given by the stage pattern (``'E'``: efficient
attention over spatially reduced keys/values, ``'L'``: attention inside
non-overlapping local windows), each followed by a feed-forward network, and
closes with a layer normalization. All blocks are pre-normalized and wrapped
in residual connections. No positional encodings are used; the 3x3
depth-wise convolution of :class:`MixFFN` provides position information.
"""

from gastwin.errors import GeometryError
from gastwin.nn.module import Module, ModuleList
from gastwin.nn.layers import Linear, Conv2d, LayerNorm, Dropout
from gastwin.tensor import RngState, pad
from gastwin.tensor.functional import softmax, gelu

INPUT_MULTIPLE = 32
"""Input extents must be multiples of this (total stride of the encoder)."""


def _check_tokens(tokens, h, w):
    if tokens.ndim != 3 or tokens.shape[1] != h * w:
        raise GeometryError('token tensor of shape {} does not match a {}x{} '
                            'token map'.format(tokens.shape, h, w))


def tokens_to_map(tokens, h, w):
    """``(N, H*W, C)`` -> ``(N, C, H, W)``."""
    n, _, c = tokens.shape
    return tokens.transpose(0, 2, 1).reshape(n, c, h, w)


def map_to_tokens(fmap):
    """``(N, C, H, W)`` -> ``(N, H*W, C)``."""
    n, c, h, w = fmap.shape
    return fmap.reshape(n, c, h * w).transpose(0, 2, 1)


def scaled_dot_product_attention(q, k, v, heads, attn_drop=None):
    """
    Multi-head attention ``softmax(Q K^T / sqrt(d_head)) V``.

    Parameters
    ----------
    q : :class:`Tensor`
        Queries ``(B, Tq, C)``.
    k, v : :class:`Tensor`
        Keys and values ``(B, Tk, C)``.
    heads : int
        Number of heads; ``d_head = C // heads``.
    attn_drop : :class:`gastwin.nn.layers.Dropout`, optional
        Dropout on the attention probabilities.

    Returns
    -------
    out : :class:`Tensor`
        ``(B, Tq, C)``, heads concatenated along the channels.
    """
    b, tq, c = q.shape
    tk = k.shape[1]
    d = c // heads
    qh = q.reshape(b, tq, heads, d).transpose(0, 2, 1, 3)
    kh = k.reshape(b, tk, heads, d).transpose(0, 2, 3, 1)
    vh = v.reshape(b, tk, heads, d).transpose(0, 2, 1, 3)
    probs = softmax((qh @ kh) * (d ** -0.5))
    if attn_drop is not None:
        probs = attn_drop(probs)
    return (probs @ vh).transpose(0, 2, 1, 3).reshape(b, tq, c)


class OverlapPatchEmbed(Module):
    """
    Strided convolution with overlapping receptive fields, flattened to
    tokens and layer normalized.
    """
    def __init__(self, in_channels, cfg, rng=None):
        super().__init__()
        rng = rng or RngState()
        self.proj = Conv2d(in_channels, cfg.out_channels, cfg.patch_kernel,
                           stride=cfg.patch_stride, padding=cfg.patch_pad,
                           rng=rng)
        self.norm = LayerNorm(cfg.out_channels, eps=cfg.norm_eps)

    def forward(self, x):
        """
        Returns
        -------
        tokens : :class:`Tensor`
            ``(N, H'*W', C_out)``.
        h, w : int
            Token map extents.
        """
        fmap = self.proj(x)
        h, w = fmap.shape[2:]
        return self.norm(map_to_tokens(fmap)), h, w


class EfficientAttention(Module):
    """
    Multi-head attention with spatially reduced keys and values.

    Keys and values are computed from the token map after a convolution with
    kernel size and stride ``R`` and a layer normalization, reducing the
    number of keys to ``ceil(H / R) * ceil(W / R)`` (the map is zero-padded
    at the bottom/right to multiples of ``R``). With ``R == 1`` no reduction
    layer exists.

    Attributes
    ----------
    norm : :class:`LayerNorm`
        Pre-normalization.
    q, kv, proj : :class:`Linear`
        Query, key/value (concatenated) and output projections.
    sr, sr_norm : :class:`Conv2d`, :class:`LayerNorm` or `None`
        Spatial reduction.
    """
    kind = 'E'

    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or RngState()
        dim = cfg.out_channels
        self.heads = cfg.heads
        self.reduction_ratio = cfg.reduction_ratio
        self.norm = LayerNorm(dim, eps=cfg.norm_eps)
        self.q = Linear(dim, dim, rng=rng)
        if self.reduction_ratio > 1:
            self.sr = Conv2d(dim, dim, self.reduction_ratio,
                             stride=self.reduction_ratio, rng=rng)
            self.sr_norm = LayerNorm(dim, eps=cfg.norm_eps)
        else:
            self.sr = self.sr_norm = None
        self.kv = Linear(dim, 2 * dim, rng=rng)
        self.proj = Linear(dim, dim, rng=rng)
        self.attn_drop = Dropout(cfg.dropout, rng=rng.spawn('attn_drop'))
        self.proj_drop = Dropout(cfg.dropout, rng=rng.spawn('proj_drop'))

    def reduce(self, x, h, w):
        """Spatially reduce normalized tokens ``(N, H*W, C)``."""
        if self.sr is None:
            return x
        r = self.reduction_ratio
        fmap = tokens_to_map(x, h, w)
        pad_h, pad_w = (-h) % r, (-w) % r
        if pad_h or pad_w:
            fmap = pad(fmap, ((0, 0), (0, 0), (0, pad_h), (0, pad_w)))
        return self.sr_norm(map_to_tokens(self.sr(fmap)))

    def forward(self, tokens, h, w):
        _check_tokens(tokens, h, w)
        c = tokens.shape[2]
        x = self.norm(tokens)
        q = self.q(x)
        kv = self.kv(self.reduce(x, h, w))
        out = scaled_dot_product_attention(q, kv[:, :, :c], kv[:, :, c:],
                                           self.heads, self.attn_drop)
        return tokens + self.proj_drop(self.proj(out))


class LocallyGroupedAttention(Module):
    """
    Multi-head self-attention inside non-overlapping ``w1 x w2`` windows.

    The normalized token map is zero-padded at the bottom/right to window
    multiples; padded positions take part in the attention of their window
    and are removed afterwards.
    """
    kind = 'L'

    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or RngState()
        dim = cfg.out_channels
        self.heads = cfg.heads
        self.window = tuple(cfg.window)
        self.norm = LayerNorm(dim, eps=cfg.norm_eps)
        self.qkv = Linear(dim, 3 * dim, rng=rng)
        self.proj = Linear(dim, dim, rng=rng)
        self.attn_drop = Dropout(cfg.dropout, rng=rng.spawn('attn_drop'))
        self.proj_drop = Dropout(cfg.dropout, rng=rng.spawn('proj_drop'))

    def forward(self, tokens, h, w):
        _check_tokens(tokens, h, w)
        n, _, c = tokens.shape
        w1, w2 = self.window
        x = self.norm(tokens).reshape(n, h, w, c)
        pad_h, pad_w = (-h) % w1, (-w) % w2
        if pad_h or pad_w:
            x = pad(x, ((0, 0), (0, pad_h), (0, pad_w), (0, 0)))
        hp, wp = h + pad_h, w + pad_w
        gh, gw = hp // w1, wp // w2
        qkv = self.qkv(x)
        windows = (qkv.reshape(n, gh, w1, gw, w2, 3 * c)
                   .transpose(0, 1, 3, 2, 4, 5)
                   .reshape(n * gh * gw, w1 * w2, 3 * c))
        out = scaled_dot_product_attention(
            windows[:, :, :c], windows[:, :, c:2 * c], windows[:, :, 2 * c:],
            self.heads, self.attn_drop)
        out = (out.reshape(n, gh, gw, w1, w2, c)
               .transpose(0, 1, 3, 2, 4, 5)
               .reshape(n, hp, wp, c))
        if pad_h or pad_w:
            out = out[:, :h, :w, :]
        out = out.reshape(n, h * w, c)
        return tokens + self.proj_drop(self.proj(out))


class MixFFN(Module):
    """
    Feed-forward network ``fc2(gelu(dwconv3x3(fc1(norm(x))))) + x``.

    With ``ffn == 'plain'`` the depth-wise convolution is left out.
    """
    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or RngState()
        dim = cfg.out_channels
        hidden = dim * cfg.mlp_expansion
        self.norm = LayerNorm(dim, eps=cfg.norm_eps)
        self.fc1 = Linear(dim, hidden, rng=rng)
        self.dwconv = (Conv2d(hidden, hidden, 3, padding=1, groups=hidden,
                              rng=rng) if cfg.ffn == 'mix' else None)
        self.fc2 = Linear(hidden, dim, rng=rng)
        self.drop = Dropout(cfg.dropout, rng=rng.spawn('ffn_drop'))

    def forward(self, tokens, h, w):
        _check_tokens(tokens, h, w)
        x = self.fc1(self.norm(tokens))
        if self.dwconv is not None:
            x = map_to_tokens(self.dwconv(tokens_to_map(x, h, w)))
        x = self.drop(self.fc2(self.drop(gelu(x))))
        return tokens + x


class Block(Module):
    """Attention (``'E'`` or ``'L'``) followed by the feed-forward network.
    """
    def __init__(self, kind, cfg, rng=None):
        super().__init__()
        rng = rng or RngState()
        attention = {'E': EfficientAttention,
                     'L': LocallyGroupedAttention}[kind]
        self.attn = attention(cfg, rng=rng)
        self.ffn = MixFFN(cfg, rng=rng)

    def forward(self, tokens, h, w):
        return self.ffn(self.attn(tokens, h, w), h, w)


class Stage(Module):
    def __init__(self, in_channels, cfg, rng=None):
        super().__init__()
        rng = rng or RngState()
        self.patch_embed = OverlapPatchEmbed(in_channels, cfg, rng=rng)
        self.blocks = ModuleList(
            Block(kind, cfg, rng=rng.spawn('block{}'.format(i)))
            for i, kind in enumerate(cfg.pattern))
        self.norm = LayerNorm(cfg.out_channels, eps=cfg.norm_eps)

    def forward(self, x):
        tokens, h, w = self.patch_embed(x)
        for block in self.blocks:
            tokens = block(tokens, h, w)
        return tokens_to_map(self.norm(tokens), h, w)


class FeaturePyramid:
    """
    The four encoder outputs.

    Attributes
    ----------
    features : list of :class:`Tensor`
        ``[F1, F2, F3, F4]`` of shapes ``(N, C_i, H / 2**(i+1), W /
        2**(i+1))``.
    input_size : (int, int)
        Extents of the encoded image.
    """
    def __init__(self, features, input_size):
        if not features:
            raise GeometryError('empty feature pyramid')
        self.features = list(features)
        self.input_size = tuple(input_size)

    def __getitem__(self, stage):
        """Return ``F<stage>`` (1-based)."""
        return self.features[stage - 1]

    def __len__(self):
        return len(self.features)

    @property
    def shapes(self):
        return [tuple(f.shape[1:]) for f in self.features]


class MixTwinEncoder(Module):
    """
    Hierarchical encoder mapping ``(N, 3, H, W)`` images to a
    :class:`FeaturePyramid`.

    Parameters
    ----------
    cfg : :class:`gastwin.modelconfig.ModelConfig`
    rng : :class:`RngState`, optional
        Initialization (and dropout) randomness.
    """
    def __init__(self, cfg, rng=None):
        super().__init__()
        rng = rng or RngState(cfg.seed)
        in_channels = cfg.in_channels
        stages = []
        for i, stage_cfg in enumerate(cfg.stages):
            stages.append(Stage(in_channels, stage_cfg,
                                rng=rng.spawn('stage{}'.format(i + 1))))
            in_channels = stage_cfg.out_channels
        self.stages = ModuleList(stages)

    @property
    def out_channels(self):
        return [s.norm.weight.shape[0] for s in self.stages]

    def forward(self, image):
        h, w = image.shape[2:]
        if h % INPUT_MULTIPLE or w % INPUT_MULTIPLE:
            raise GeometryError('input extents {}x{} must be multiples of {}'
                                .format(h, w, INPUT_MULTIPLE))
        features, x = [], image
        for stage in self.stages:
            x = stage(x)
            features.append(x)
        return FeaturePyramid(features, (h, w))


def count_attention_blocks(cfg):
    """Number of attention blocks over all stages."""
    return sum(len(s.pattern) for s in cfg.stages)
