package org.example.music;

import android.app.Activity;
import android.media.MediaPlayer;
import android.os.Bundle;

public class MediaPlayerLifecycle extends Activity {
    private MediaPlayer player;

    @Override
    protected void onCreate(Bundle state) {
        super.onCreate(state);
        player = MediaPlayer.create(this, R.raw.intro);
    }

    @Override
    protected void onDestroy() {
        if (player != null) {
            player.release();
            player = null;
        }
        super.onDestroy();
    }
}
