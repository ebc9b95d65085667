"""Network families: encoder, decoder, discriminators, feature translators.

All forward ops take batched NCHW tensors. The encoder emits the posterior
mean only (covariance is fixed to identity), latents are spatial maps at
1/8 resolution, and the residual-block translator is exactly the identity
at initialization (zero-initialized final conv in every residual branch).

The perceptual extractor is a fixed random-weight conv stack built from a
hard-coded seed; it is never trained and stands in for a pretrained
feature network so distances computed on it are reproducible everywhere.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, replace

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ArchitectureError

KINDS = (
    "encoder",
    "decoder",
    "image_discriminator",
    "translator_resblocks",
    "translator_fc",
    "translation_discriminator",
)

DOWNSAMPLE_FACTOR = 8
PERCEPTUAL_SEED = 907143525
PERCEPTUAL_STAGES = 4
_PERCEPTUAL_WIDTHS = (16, 32, 64, 128)


@dataclass(frozen=True)
class Arch:
    """Architecture descriptor; fully determines a module's structure.

    head_gain multiplies the init scale of the encoder's latent-mean head
    so latents start with usable signal against the fixed unit posterior
    covariance (at unit scale the decoder learns to ignore the
    noise-dominated latent before the encoder can inject information,
    which stalls reconstruction).
    """

    kind: str
    in_channels: int = 3
    base_channels: int = 32
    latent_channels: int = 64
    scales: int = 2
    taps_per_scale: int = 3
    num_blocks: int = 9
    fc_layers: int = 5
    fc_width: int = 256
    latent_height: int = 8
    latent_width: int = 8
    head_gain: float = 3.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ArchitectureError(f"unknown architecture kind: {self.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Arch":
        return cls(**d)


def _lrelu() -> nn.Module:
    return nn.LeakyReLU(0.2)


def _norm(channels: int) -> nn.Module:
    # GroupNorm stays well-defined down to 1x1 spatial maps (instance norm
    # is not); groups chosen so every group has at least two elements.
    groups = max(1, min(math.gcd(channels, 4), channels // 2))
    return nn.GroupNorm(groups, channels, affine=True)


class Encoder(nn.Module):
    """3 stride-2 conv stages (b, 2b, 4b) + a head conv to the latent mean."""

    def __init__(self, arch: Arch):
        super().__init__()
        b, c = arch.base_channels, arch.latent_channels
        self.features = nn.Sequential(
            nn.Conv2d(arch.in_channels, b, 3, stride=2, padding=1),
            _lrelu(),
            nn.Conv2d(b, 2 * b, 3, stride=2, padding=1),
            _norm(2 * b),
            _lrelu(),
            nn.Conv2d(2 * b, 4 * b, 3, stride=2, padding=1),
            _norm(4 * b),
            _lrelu(),
        )
        self.head = nn.Conv2d(4 * b, c, 3, padding=1)

    def forward(self, x):
        return self.head(self.features(x))


class Decoder(nn.Module):
    """Mirror of the encoder: 3 transposed-conv upsamples, tanh output."""

    def __init__(self, arch: Arch):
        super().__init__()
        b, c = arch.base_channels, arch.latent_channels
        self.net = nn.Sequential(
            nn.Conv2d(c, 4 * b, 3, padding=1),
            _norm(4 * b),
            nn.ReLU(),
            nn.ConvTranspose2d(4 * b, 2 * b, 4, stride=2, padding=1),
            _norm(2 * b),
            nn.ReLU(),
            nn.ConvTranspose2d(2 * b, b, 4, stride=2, padding=1),
            _norm(b),
            nn.ReLU(),
            nn.ConvTranspose2d(b, b, 4, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(b, arch.in_channels, 3, padding=1),
            nn.Tanh(),
        )

    def forward(self, z):
        return self.net(z)


class PatchDiscriminator(nn.Module):
    """Patch-level scores plus tapped intermediate activations."""

    def __init__(self, arch: Arch):
        super().__init__()
        b = arch.base_channels
        self.block1 = nn.Sequential(nn.Conv2d(arch.in_channels, b, 3, stride=2, padding=1), _lrelu())
        self.block2 = nn.Sequential(
            nn.Conv2d(b, 2 * b, 3, stride=2, padding=1),
            _norm(2 * b),
            _lrelu(),
        )
        self.block3 = nn.Sequential(
            nn.Conv2d(2 * b, 4 * b, 3, stride=2, padding=1),
            _norm(4 * b),
            _lrelu(),
        )
        self.score = nn.Conv2d(4 * b, 1, 3, padding=1)

    def forward(self, x):
        t1 = self.block1(x)
        t2 = self.block2(t1)
        t3 = self.block3(t2)
        return self.score(t3), [t1, t2, t3]


class MultiScaleDiscriminator(nn.Module):
    """Independent patch discriminators at full and halved resolutions."""

    def __init__(self, arch: Arch):
        super().__init__()
        self.nets = nn.ModuleList(PatchDiscriminator(arch) for _ in range(arch.scales))

    def forward(self, x):
        scores, feats = [], []
        for i, net in enumerate(self.nets):
            k = min(2**i, x.shape[2], x.shape[3])
            inp = F.avg_pool2d(x, k) if k > 1 else x
            s, taps = net(inp)
            scores.append(s)
            feats.extend(taps)
        return scores, feats


class ResBlock(nn.Module):
    """conv-norm-ReLU-conv branch; the final conv is zeroed at init."""

    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1)
        self.norm = _norm(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1)

    def forward(self, x):
        h = F.relu(self.norm(self.conv1(x)))
        return x + self.conv2(h)

    def zero_branch(self):
        nn.init.zeros_(self.conv2.weight)
        nn.init.zeros_(self.conv2.bias)


class ResBlockTranslator(nn.Module):
    """Stack of residual blocks on the spatial latent; identity at init."""

    def __init__(self, arch: Arch):
        super().__init__()
        self.blocks = nn.Sequential(*(ResBlock(arch.latent_channels) for _ in range(arch.num_blocks)))

    def forward(self, z):
        return self.blocks(z)


class FCTranslator(nn.Module):
    """Fully connected translator over the flattened latent vector."""

    def __init__(self, arch: Arch):
        super().__init__()
        d = arch.latent_channels * arch.latent_height * arch.latent_width
        w = arch.fc_width
        layers: list[nn.Module] = [nn.Linear(d, w), nn.ReLU()]
        for _ in range(arch.fc_layers - 2):
            layers += [nn.Linear(w, w), nn.ReLU()]
        layers.append(nn.Linear(w, d))
        self.net = nn.Sequential(*layers)
        self.latent_shape = (arch.latent_channels, arch.latent_height, arch.latent_width)

    def forward(self, z):
        n = z.shape[0]
        out = self.net(z.reshape(n, -1))
        return out.reshape(n, *self.latent_shape)


class PerceptualExtractor(nn.Module):
    """Fixed random-weight conv stack; 4 stride-2 stages, one tap each."""

    def __init__(self):
        super().__init__()
        chans = (3,) + _PERCEPTUAL_WIDTHS
        self.stages = nn.ModuleList(
            nn.Sequential(nn.Conv2d(chans[i], chans[i + 1], 3, stride=2, padding=1), _lrelu())
            for i in range(PERCEPTUAL_STAGES)
        )

    def forward(self, x):
        feats = []
        h = x
        for stage in self.stages:
            h = stage(h)
            feats.append(h)
        return feats


_MODULE_BUILDERS = {
    "encoder": Encoder,
    "decoder": Decoder,
    "image_discriminator": MultiScaleDiscriminator,
    "translator_resblocks": ResBlockTranslator,
    "translator_fc": FCTranslator,
    "translation_discriminator": MultiScaleDiscriminator,
}


def _init_module(module: nn.Module, seed: int, head_gain: float | None = None) -> None:
    """Seeded fan-in-scaled init: preserves activation scale layer to layer.

    Flat small-std init attenuates signal multiplicatively, which makes a
    short Adam schedule unable to grow the network into a useful operating
    range; fan-in scaling avoids that. `head_gain` multiplies the encoder
    latent head (see Arch.head_gain).
    """
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            fan_in = max(1, m.weight[0].numel())
            m.weight.data.normal_(0.0, math.sqrt(2.0 / fan_in), generator=gen)
            if m.bias is not None:
                m.bias.data.zero_()
        elif isinstance(m, nn.GroupNorm):
            m.weight.data.fill_(1.0)
            m.bias.data.zero_()
    if head_gain is not None:
        module.head.weight.data.mul_(head_gain)


@dataclass
class ModelParams:
    """One network: descriptor, live module, and the seed that built it."""

    arch: Arch
    module: nn.Module
    init_seed: int

    @property
    def tensors(self) -> dict[str, torch.Tensor]:
        return dict(self.module.state_dict())

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.module.parameters())

    def checksum(self) -> str:
        """Digest of all parameter bytes; used by the freeze contract."""
        h = hashlib.sha256()
        for name, t in sorted(self.tensors.items()):
            h.update(name.encode())
            h.update(t.detach().cpu().contiguous().numpy().tobytes())
        return h.hexdigest()


def build_model(arch: Arch, init_seed: int) -> ModelParams:
    """Construct and deterministically initialize a network from its descriptor."""
    module = _MODULE_BUILDERS[arch.kind](arch)
    head_gain = arch.head_gain if arch.kind == "encoder" else None
    _init_module(module, init_seed, head_gain=head_gain)
    if arch.kind == "translator_resblocks":
        for block in module.blocks:
            block.zero_branch()
    return ModelParams(arch=arch, module=module, init_seed=init_seed)


def _check_input(params: ModelParams, x: torch.Tensor, expected_kinds: tuple[str, ...]) -> None:
    if params.arch.kind not in expected_kinds:
        raise ArchitectureError(
            f"expected one of {expected_kinds}, got kind {params.arch.kind!r}"
        )
    if x.ndim != 4:
        raise ArchitectureError(f"expected a batched NCHW tensor, got shape {tuple(x.shape)}")
    consumes_input_channels = ("encoder", "image_discriminator", "translation_discriminator")
    if params.arch.kind in consumes_input_channels and x.shape[1] != params.arch.in_channels:
        raise ArchitectureError(
            f"{params.arch.kind} expects {params.arch.in_channels} channels, got {x.shape[1]}"
        )


def encode(e: ModelParams, x: torch.Tensor) -> torch.Tensor:
    """Posterior mean of q(z|x); deterministic, shape C x H/8 x W/8."""
    _check_input(e, x, ("encoder",))
    if x.shape[2] % DOWNSAMPLE_FACTOR or x.shape[3] % DOWNSAMPLE_FACTOR:
        raise ArchitectureError(
            f"encoder input H,W must be multiples of {DOWNSAMPLE_FACTOR}, got {tuple(x.shape[2:])}"
        )
    return e.module(x)


def sample_latent(
    mean: torch.Tensor, noise_seed: int, sigma: float = 1.0
) -> torch.Tensor:
    """Reparameterized draw mean + sigma * eps, eps ~ N(0, I), seeded.

    sigma=0 returns the mean exactly; gradients flow through the mean.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if sigma == 0:
        return mean
    gen = torch.Generator().manual_seed(int(noise_seed) % (2**63))
    eps = torch.randn(mean.shape, generator=gen, dtype=mean.dtype)
    return mean + sigma * eps


def decode(g: ModelParams, z: torch.Tensor) -> torch.Tensor:
    """Map a latent back to an image in [-1, 1], 8x upsampled."""
    _check_input(g, z, ("decoder",))
    if z.shape[1] != g.arch.latent_channels:
        raise ArchitectureError(
            f"decoder expects {g.arch.latent_channels} latent channels, got {z.shape[1]}"
        )
    return g.module(z)


def discriminate(d: ModelParams, x: torch.Tensor) -> tuple[list[torch.Tensor], list[torch.Tensor]]:
    """Patch score maps (one per scale) plus tapped intermediate features."""
    _check_input(d, x, ("image_discriminator", "translation_discriminator"))
    return d.module(x)


def translate_features(t: ModelParams, z: torch.Tensor) -> torch.Tensor:
    """Map a domain-1 latent into domain-2 latent space; shape preserved."""
    _check_input(t, z, ("translator_resblocks", "translator_fc"))
    if z.shape[1] != t.arch.latent_channels:
        raise ArchitectureError(
            f"translator expects {t.arch.latent_channels} latent channels, got {z.shape[1]}"
        )
    if t.arch.kind == "translator_fc" and tuple(z.shape[1:]) != (
        t.arch.latent_channels,
        t.arch.latent_height,
        t.arch.latent_width,
    ):
        raise ArchitectureError(
            f"fc translator expects latent shape "
            f"{(t.arch.latent_channels, t.arch.latent_height, t.arch.latent_width)}, "
            f"got {tuple(z.shape[1:])}"
        )
    return t.module(z)


_perceptual_cache: dict[torch.dtype, PerceptualExtractor] = {}


def _perceptual_extractor(dtype: torch.dtype) -> PerceptualExtractor:
    if dtype not in _perceptual_cache:
        net = PerceptualExtractor()
        _init_module(net, PERCEPTUAL_SEED)
        net = net.to(dtype)
        for p in net.parameters():
            p.requires_grad_(False)
        _perceptual_cache[dtype] = net
    return _perceptual_cache[dtype]


def perceptual_features(x: torch.Tensor) -> list[torch.Tensor]:
    """Activations of the fixed random conv stack; one tap per stage."""
    if x.ndim != 4 or x.shape[1] != 3:
        raise ArchitectureError(f"expected an NCHW RGB tensor, got shape {tuple(x.shape)}")
    return _perceptual_extractor(x.dtype)(x)


def default_archs(
    base_channels: int = 32,
    latent_channels: int = 64,
    disc_scales: int = 2,
    translator_kind: str = "resblocks",
    translator_blocks: int = 9,
    fc_layers: int = 5,
    fc_width: int = 256,
    image_size: int = 64,
    head_gain: float = 3.0,
) -> dict[str, Arch]:
    """Descriptor set for one translation problem, keyed by role."""
    common = dict(base_channels=base_channels, latent_channels=latent_channels)
    translator = (
        Arch(kind="translator_resblocks", num_blocks=translator_blocks, **common)
        if translator_kind == "resblocks"
        else Arch(
            kind="translator_fc",
            fc_layers=fc_layers,
            fc_width=fc_width,
            latent_height=image_size // DOWNSAMPLE_FACTOR,
            latent_width=image_size // DOWNSAMPLE_FACTOR,
            **common,
        )
    )
    return {
        "encoder": Arch(kind="encoder", head_gain=head_gain, **common),
        "decoder": Arch(kind="decoder", **common),
        "image_discriminator": Arch(kind="image_discriminator", scales=disc_scales, **common),
        "translator": translator,
        "translation_discriminator": replace(
            Arch(kind="translation_discriminator", scales=disc_scales, **common),
            in_channels=latent_channels,
        ),
    }
